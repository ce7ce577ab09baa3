//! Model-free hierarchical Z-learning.
//!
//! Transitions are sampled under the policy implied by the current
//! estimates. Every sample updates all base estimates of the class it
//! falls in (intra-task learning); exit estimates are refreshed by the
//! compositional rule, triggered according to a [`Variant`].

mod flat;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::{compose_state_value, BaseValueSet, PartitionSpec, SubtaskTemplate};
use crate::lmdp::{z_learning_step, Lmdp, PolicyRow, TransitionSample};
use crate::scalar::Scalar;

pub use flat::{train_flat, FlatLearner, FlatOutcome};

/// When exit estimates are refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// After each transition out of an exit state.
    V1,
    /// As `V1`, plus every exit of the partition when leaving it.
    V2,
    /// As `V2`, over every partition of the class.
    V3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::V1, Variant::V2, Variant::V3];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "V1",
            Variant::V2 => "V2",
            Variant::V3 => "V3",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "V1" | "1" => Ok(Variant::V1),
            "V2" | "2" => Ok(Variant::V2),
            "V3" | "3" => Ok(Variant::V3),
            _ => Err(Error::Config(format!("unknown variant `{s}` (expected V1, V2 or V3)"))),
        }
    }
}

/// Where episodes start.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StartDistribution {
    /// Uniform over non-terminal states.
    #[default]
    Uniform,
    /// Unnormalized weights over non-terminal states.
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig<T> {
    pub lambda: T,
    pub c_base: T,
    pub c_exit: T,
    pub variant: Variant,
    pub max_episodes: usize,
    /// Defaults to `10 * S`.
    pub max_steps_per_episode: Option<usize>,
    /// Overall sample budget; the run stops mid-episode once reached.
    pub max_total_steps: Option<usize>,
    pub seed: u64,
    /// Episodes between MAE snapshots.
    pub evaluation_period: usize,
    pub start: StartDistribution,
}

impl<T: Scalar> Default for LearnConfig<T> {
    fn default() -> Self {
        LearnConfig {
            lambda: T::one(),
            c_base: T::lit(30.0),
            c_exit: T::lit(30.0),
            variant: Variant::V3,
            max_episodes: 1000,
            max_steps_per_episode: None,
            max_total_steps: None,
            seed: 0,
            evaluation_period: 100,
            start: StartDistribution::Uniform,
        }
    }
}

impl<T: Scalar> LearnConfig<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.c_base > T::zero()) || !(self.c_exit > T::zero()) {
            return Err(Error::Config("learning-rate constants must be positive".into()));
        }
        if self.evaluation_period == 0 {
            return Err(Error::Config("evaluation period must be at least 1".into()));
        }
        if self.max_steps_per_episode == Some(0) {
            return Err(Error::Config("step cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// `c / (c + n)`.
pub fn lr_schedule<T: Scalar>(c: T, n: usize) -> T {
    c / (c + T::from_usize(n).expect("episode index fits scalar"))
}

/// Mean of `|v_hat - v|` over the given states; entries where both are
/// `-inf` count as zero.
pub fn mae<T: Scalar>(estimates: &[T], truth: &[T]) -> f64 {
    assert_eq!(estimates.len(), truth.len(), "mae over different state sets");
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(&a, &b)| {
            let (a, b) = (a.to_f64().unwrap_or(f64::NAN), b.to_f64().unwrap_or(f64::NAN));
            if a == b {
                0.0
            } else {
                (a - b).abs()
            }
        })
        .sum();
    total / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub steps: usize,
    pub episode: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub points: Vec<TracePoint>,
}

impl Trace {
    pub fn final_mae(&self) -> Option<f64> {
        self.points.last().map(|p| p.mae)
    }

    /// CSV with columns `steps,episode,variant,seed,mae`.
    pub fn to_csv(&self, variant: &str, seed: u64) -> String {
        let mut out = String::from("steps,episode,variant,seed,mae\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{variant},{seed},{}\n", p.steps, p.episode, p.mae));
        }
        out
    }
}

/// Estimates of one hierarchical learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState<T> {
    pub base_estimates: BaseValueSet<T>,
    /// Indexed like `spec.exits()`; pinned exits hold `exp(J / lambda)`.
    pub exit_estimates: Vec<T>,
    pub episode: usize,
    pub steps: usize,
    /// Per class and local state, the slots reachable in one step.
    direct_slots: Vec<Vec<Vec<usize>>>,
}

impl<T: Scalar> LearnerState<T> {
    /// All estimates 1, pinned exits at their terminal values.
    pub fn new(lmdp: &Lmdp<T>, spec: &PartitionSpec, templates: &[SubtaskTemplate<T>], lambda: T) -> Self {
        let exit_estimates = spec
            .exits()
            .iter()
            .map(|&g| if lmdp.is_terminal(g) { lmdp.terminal_z(g, lambda) } else { T::one() })
            .collect();
        LearnerState {
            base_estimates: BaseValueSet::filled(templates, T::one()),
            exit_estimates,
            episode: 0,
            steps: 0,
            direct_slots: templates
                .iter()
                .map(|t| {
                    let mut direct = vec![Vec::new(); t.n_local];
                    for k in 0..t.n_slots {
                        for l in t.slot_sources(k) {
                            direct[l].push(k);
                        }
                    }
                    direct
                })
                .collect(),
        }
    }
}

/// Composed estimate of `s`; terminals return their pin.
pub fn estimate_state_value<T: Scalar>(ls: &LearnerState<T>, lmdp: &Lmdp<T>, spec: &PartitionSpec, s: usize, lambda: T) -> T {
    if lmdp.is_terminal(s) {
        lmdp.terminal_z(s, lambda)
    } else {
        compose_state_value(spec, &ls.base_estimates, &ls.exit_estimates, s)
    }
}

/// Estimated values of every non-terminal state, in v-space.
pub fn estimated_values<T: Scalar>(ls: &LearnerState<T>, lmdp: &Lmdp<T>, spec: &PartitionSpec, lambda: T) -> Vec<T> {
    (0..lmdp.n_states())
        .map(|s| {
            let z = estimate_state_value(ls, lmdp, spec, s, lambda);
            if z > T::zero() {
                lambda * z.ln()
            } else {
                T::neg_infinity()
            }
        })
        .collect()
}

/// Policy `P(s'|s) z(s') / sum` from a value oracle, or `P(.|s)` when every
/// successor has value zero.
pub(crate) fn greedy_row<T: Scalar>(lmdp: &Lmdp<T>, s: usize, mut z: impl FnMut(usize) -> T) -> PolicyRow<T> {
    let row = lmdp.row(s);
    let weights: Vec<T> = row.iter().map(|&(t, p)| p * z(t)).collect();
    let denom: T = weights.iter().copied().sum();
    let entries = if denom > T::zero() && denom.is_finite() {
        row.iter().zip(weights).map(|(&(t, _), w)| (t, w / denom)).collect()
    } else {
        row.to_vec()
    };
    PolicyRow { entries }
}

pub fn behavior_policy<T: Scalar>(ls: &LearnerState<T>, lmdp: &Lmdp<T>, spec: &PartitionSpec, s: usize, lambda: T) -> PolicyRow<T> {
    greedy_row(lmdp, s, |t| estimate_state_value(ls, lmdp, spec, t, lambda))
}

/// Updates every base estimate of the class of `sample.from_state`.
///
/// Base `k` is skipped at a direct source of slot `k` when this member
/// routes the slot to a blocked terminal: the behavior policy never samples
/// it, so the corrected target would miss the boundary term.
pub fn intra_task_update<T: Scalar>(ls: &mut LearnerState<T>, spec: &PartitionSpec, sample: &TransitionSample<T>, alpha: T, lambda: T) -> Result<()> {
    let s = sample.from_state;
    let next = sample.to_state;
    let i = spec.partition_of(s);
    let local = spec.local(s);
    let inside = next < spec.n_states() && spec.partition_of(next) == i;
    let leaving_slot = if inside {
        None
    } else {
        Some(spec.slot_of(i, next).ok_or(Error::DanglingSuccessor {
            partition: i,
            state: s,
            successor: next,
        })?)
    };
    let next_local = if inside { spec.local(next) } else { 0 };
    let j = spec.class_of_partition(i);
    let realized = spec.slot_exits(i);
    let direct = &ls.direct_slots[j][local];
    let class = ls.base_estimates.class_mut(j);
    for k in 0..class.n_slots() {
        if realized[k].is_none() && direct.contains(&k) {
            continue;
        }
        let target = match leaving_slot {
            None => class.get(k, next_local),
            Some(slot) => class.boundary(k, slot),
        };
        let z = z_learning_step(class.get(k, local), sample, target, alpha, lambda)?;
        class.set(k, local, z);
    }
    Ok(())
}

/// `z_E(s) <- (1 - alpha) z_E(s) + alpha sum_k z^k(f(s)) z_E(slot k)`;
/// pinned exits are left alone.
pub fn exit_update<T: Scalar>(ls: &mut LearnerState<T>, spec: &PartitionSpec, e: usize, alpha: T) {
    if spec.is_pinned_exit(e) {
        return;
    }
    let s = spec.exits()[e];
    let i = spec.partition_of(s);
    let class = ls.base_estimates.class(spec.class_of_partition(i));
    let local = spec.local(s);
    let target: T = spec
        .slot_exits(i)
        .iter()
        .enumerate()
        .filter_map(|(k, t)| t.map(|t| class.get(k, local) * ls.exit_estimates[t]))
        .sum();
    let old = ls.exit_estimates[e];
    ls.exit_estimates[e] = (T::one() - alpha) * old + alpha * target;
}

/// Exits (by index) a transition triggers under `variant`, ascending.
pub fn triggered_exits(spec: &PartitionSpec, from: usize, next: usize, variant: Variant) -> Vec<usize> {
    let mut set = BTreeSet::new();
    if let Some(e) = spec.exit_index(from) {
        set.insert(e);
    }
    let i = spec.partition_of(from);
    let leaves = next >= spec.n_states() || spec.partition_of(next) != i;
    if leaves {
        match variant {
            Variant::V1 => {}
            Variant::V2 => set.extend(spec.partition_exits(i)),
            Variant::V3 => {
                for &m in spec.class_members(spec.class_of_partition(i)) {
                    set.extend(spec.partition_exits(m));
                }
            }
        }
    }
    set.into_iter().filter(|&e| !spec.is_pinned_exit(e)).collect()
}

/// Applies the exit updates triggered by `from -> next`; returns the
/// updated exit indices.
pub fn trigger_exit_updates<T: Scalar>(ls: &mut LearnerState<T>, spec: &PartitionSpec, from: usize, next: usize, variant: Variant, alpha: T) -> Vec<usize> {
    let exits = triggered_exits(spec, from, next, variant);
    for &e in &exits {
        exit_update(ls, spec, e, alpha);
    }
    exits
}

/// What the episode loop needs from a learner.
pub(crate) trait Agent<T: Scalar> {
    fn behavior(&self, s: usize) -> PolicyRow<T>;
    fn update(&mut self, sample: &TransitionSample<T>, episode: usize) -> Result<()>;
    fn values(&self) -> Vec<T>;
}

pub(crate) struct Budget {
    pub max_episodes: usize,
    pub max_steps_per_episode: usize,
    pub max_total_steps: Option<usize>,
    pub evaluation_period: usize,
}

pub(crate) fn start_sampler(start: &StartDistribution, n_states: usize) -> Result<Option<WeightedIndex<f64>>> {
    match start {
        StartDistribution::Uniform => {
            if n_states == 0 {
                return Err(Error::Config("no non-terminal states to start from".into()));
            }
            Ok(None)
        }
        StartDistribution::Weights(w) => {
            if w.len() != n_states {
                return Err(Error::DimensionMismatch {
                    expected: n_states,
                    actual: w.len(),
                });
            }
            WeightedIndex::new(w)
                .map(Some)
                .map_err(|e| Error::Config(format!("invalid start distribution: {e}")))
        }
    }
}

/// Runs episodes and records `(steps, episode, mae)` snapshots. Returns the
/// trace, total steps and completed episodes.
pub(crate) fn run_episodes<T: Scalar, A: Agent<T>>(
    agent: &mut A,
    lmdp: &Lmdp<T>,
    truth: &[T],
    budget: &Budget,
    start: &StartDistribution,
    seed: u64,
) -> Result<(Trace, usize, usize)> {
    if truth.len() != lmdp.n_states() {
        return Err(Error::DimensionMismatch {
            expected: lmdp.n_states(),
            actual: truth.len(),
        });
    }
    let sampler = start_sampler(start, lmdp.n_states())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Trace::default();
    let mut steps = 0;
    let mut episodes = 0;
    let exhausted = |steps: usize| budget.max_total_steps.is_some_and(|b| steps >= b);

    for n in 0..budget.max_episodes {
        if exhausted(steps) {
            break;
        }
        let mut s = match &sampler {
            Some(w) => w.sample(&mut rng),
            None => rng.gen_range(0..lmdp.n_states()),
        };
        for _ in 0..budget.max_steps_per_episode {
            if exhausted(steps) {
                break;
            }
            let row = agent.behavior(s);
            let u = T::from_f64(rng.gen::<f64>()).expect("uniform variate fits scalar");
            let (next, q) = row.sample_with(u);
            let sample = TransitionSample {
                from_state: s,
                reward: lmdp.state_reward(s),
                to_state: next,
                uncontrolled_prob: lmdp.prob(s, next),
                behavior_prob: q,
            };
            agent.update(&sample, n)?;
            steps += 1;
            if lmdp.is_terminal(next) {
                break;
            }
            s = next;
        }
        episodes = n + 1;
        if episodes % budget.evaluation_period == 0 {
            trace.points.push(TracePoint {
                steps,
                episode: episodes,
                mae: mae(&agent.values(), truth),
            });
        }
    }
    if episodes > 0 && trace.points.last().map_or(true, |p| p.episode != episodes) {
        trace.points.push(TracePoint {
            steps,
            episode: episodes,
            mae: mae(&agent.values(), truth),
        });
    }
    Ok((trace, steps, episodes))
}

struct Hierarchical<'a, T> {
    lmdp: &'a Lmdp<T>,
    spec: &'a PartitionSpec,
    cfg: &'a LearnConfig<T>,
    state: LearnerState<T>,
}

impl<T: Scalar> Agent<T> for Hierarchical<'_, T> {
    fn behavior(&self, s: usize) -> PolicyRow<T> {
        behavior_policy(&self.state, self.lmdp, self.spec, s, self.cfg.lambda)
    }

    fn update(&mut self, sample: &TransitionSample<T>, episode: usize) -> Result<()> {
        let lambda = self.cfg.lambda;
        intra_task_update(&mut self.state, self.spec, sample, lr_schedule(self.cfg.c_base, episode), lambda)?;
        trigger_exit_updates(
            &mut self.state,
            self.spec,
            sample.from_state,
            sample.to_state,
            self.cfg.variant,
            lr_schedule(self.cfg.c_exit, episode),
        );
        Ok(())
    }

    fn values(&self) -> Vec<T> {
        estimated_values(&self.state, self.lmdp, self.spec, self.cfg.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub state: LearnerState<T>,
    pub trace: Trace,
}

/// Trains from fresh estimates; `truth` holds optimal values of the
/// non-terminal states (v-space) for the MAE snapshots.
pub fn train<T: Scalar>(
    lmdp: &Lmdp<T>,
    spec: &PartitionSpec,
    templates: &[SubtaskTemplate<T>],
    cfg: &LearnConfig<T>,
    truth: &[T],
) -> Result<TrainOutcome<T>> {
    cfg.check()?;
    let mut agent = Hierarchical {
        lmdp,
        spec,
        cfg,
        state: LearnerState::new(lmdp, spec, templates, cfg.lambda),
    };
    let budget = Budget {
        max_episodes: cfg.max_episodes,
        max_steps_per_episode: cfg.max_steps_per_episode.unwrap_or(10 * lmdp.n_states()),
        max_total_steps: cfg.max_total_steps,
        evaluation_period: cfg.evaluation_period,
    };
    let (trace, steps, episodes) = run_episodes(&mut agent, lmdp, truth, &budget, &cfg.start, cfg.seed)?;
    let mut state = agent.state;
    state.steps = steps;
    state.episode = episodes;
    Ok(TrainOutcome { state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_rooms, Decomposition, RoomsConfig, Slot};
    use crate::hierarchy::{induce_partition, solve_bases, solve_hierarchical, PartitionInput};
    use crate::lmdp::{policy_from_z, solve_flat, SolveConfig};

    fn rooms() -> Decomposition<f64> {
        build_rooms(&RoomsConfig::default()).unwrap()
    }

    fn truth(d: &Decomposition<f64>) -> Vec<f64> {
        let z = solve_flat(&d.lmdp, &SolveConfig::default()).unwrap();
        z.to_values(1.0)[..d.lmdp.n_states()].to_vec()
    }

    #[test]
    fn schedule() {
        assert_eq!(lr_schedule(7.0, 0), 1.0);
        assert_eq!(lr_schedule(100.0, 100), 0.5);
        assert!((lr_schedule(50.0f64, 450) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("v2".parse::<Variant>().unwrap(), Variant::V2);
        assert!("V4".parse::<Variant>().is_err());
        assert_eq!(Variant::V3.to_string(), "V3");
    }

    #[test]
    fn mae_conventions() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(mae(&[1.5, 2.5], &[1.0, 2.0]), 0.5);
        assert_eq!(mae(&[f64::NEG_INFINITY, 1.0], &[f64::NEG_INFINITY, 1.0]), 0.0);
        assert_eq!(mae(&[f64::NEG_INFINITY], &[0.0]), f64::INFINITY);
    }

    #[test]
    fn fresh_state() {
        let d = rooms();
        let ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        assert_eq!(ls.exit_estimates.iter().filter(|&&z| z == 1.0).count(), 9);
        // two real slots per room (three with G) and every estimate 1
        let v = estimate_state_value(&ls, &d.lmdp, &d.spec, 0, 1.0);
        assert_eq!(v, 2.0);
        let goal_room_cell = RoomsConfig::default().goal_state();
        assert_eq!(estimate_state_value(&ls, &d.lmdp, &d.spec, goal_room_cell, 1.0), 3.0);
        assert_eq!(estimate_state_value(&ls, &d.lmdp, &d.spec, 100, 1.0), 1.0);
    }

    #[test]
    fn fresh_policy_is_uncontrolled_inside_room() {
        let d = rooms();
        let ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        // interior cell of the top-left room
        let s = RoomsConfig::default().state_index(1, 1);
        let row = behavior_policy(&ls, &d.lmdp, &d.spec, s, 1.0);
        assert_eq!(row.entries, d.lmdp.row(s).to_vec());
    }

    #[test]
    fn zero_estimates_fall_back_to_uncontrolled() {
        let d = rooms();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        ls.exit_estimates.iter_mut().for_each(|z| *z = 0.0);
        let s = RoomsConfig::default().state_index(1, 1);
        assert_eq!(estimate_state_value(&ls, &d.lmdp, &d.spec, s, 1.0), 0.0);
        let row = behavior_policy(&ls, &d.lmdp, &d.spec, s, 1.0);
        assert_eq!(row.entries, d.lmdp.row(s).to_vec());
    }

    #[test]
    fn converged_estimates_give_optimal_policy() {
        let d = rooms();
        let cfg = SolveConfig::default();
        let sol = solve_hierarchical(&d.lmdp, &d.spec, &d.templates, &cfg).unwrap();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        ls.base_estimates = sol.bases.clone();
        ls.exit_estimates = sol.exit_values.clone();
        let flat = solve_flat(&d.lmdp, &cfg).unwrap();
        for s in [0, 7, 42, 99] {
            let est = estimate_state_value(&ls, &d.lmdp, &d.spec, s, 1.0);
            assert!((est - flat[s]).abs() <= 1e-8 * flat[s]);
            let a = behavior_policy(&ls, &d.lmdp, &d.spec, s, 1.0);
            let b = policy_from_z(&d.lmdp, &flat, s).unwrap();
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-8);
            }
        }
        // exact values are a fixed point of the exit rule at any rate
        for alpha in [0.0, 0.3, 1.0] {
            let mut probe = ls.clone();
            for e in 0..d.spec.n_exits() {
                exit_update(&mut probe, &d.spec, e, alpha);
                assert!((probe.exit_estimates[e] - ls.exit_estimates[e]).abs() <= 1e-9 * ls.exit_estimates[e]);
            }
        }
    }

    #[test]
    fn zero_exits_stay_zero() {
        let d = rooms();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        ls.exit_estimates.iter_mut().for_each(|z| *z = 0.0);
        for e in 0..d.spec.n_exits() {
            exit_update(&mut ls, &d.spec, e, 0.7);
        }
        assert!(ls.exit_estimates.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn boundary_targets_on_exit() {
        let d = rooms();
        let cfg = RoomsConfig::default();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        // right doorway of the top-left room, stepping into the top-right room
        let from = cfg.state_index(4, 2);
        let to = cfg.state_index(5, 2);
        let sample = TransitionSample {
            from_state: from,
            reward: -1.0,
            to_state: to,
            uncontrolled_prob: d.lmdp.prob(from, to),
            behavior_prob: d.lmdp.prob(from, to),
        };
        intra_task_update(&mut ls, &d.spec, &sample, 1.0, 1.0).unwrap();
        let class = ls.base_estimates.class(0);
        let local = d.spec.local(from);
        let c = (-1.0f64).exp();
        for k in 0..5 {
            let want = if Slot::ALL[k] == Slot::Right { c } else { 0.0 };
            assert!((class.get(k, local) - want).abs() < 1e-15, "slot {k}");
        }
    }

    #[test]
    fn blocked_slot_base_is_not_updated_at_its_source() {
        let d = rooms();
        let cfg = RoomsConfig::default();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        // goal-slot source of the top-left room, where that slot is blocked
        let from = cfg.state_index(4, 0);
        let to = cfg.state_index(3, 0);
        let sample = TransitionSample {
            from_state: from,
            reward: -1.0,
            to_state: to,
            uncontrolled_prob: d.lmdp.prob(from, to),
            behavior_prob: 0.5,
        };
        intra_task_update(&mut ls, &d.spec, &sample, 1.0, 1.0).unwrap();
        let class = ls.base_estimates.class(0);
        let local = d.spec.local(from);
        assert_eq!(class.get(0, local), 1.0);
        assert!(class.get(2, local) < 1.0);
        // the same cell in the goal room does update its goal base
        let from = cfg.state_index(9, 0);
        let sample = TransitionSample {
            from_state: from,
            to_state: from - 1,
            ..sample
        };
        intra_task_update(&mut ls, &d.spec, &sample, 1.0, 1.0).unwrap();
        assert!(ls.base_estimates.class(0).get(0, local) < 1.0);
    }

    #[test]
    fn dangling_successor_is_reported() {
        let d = rooms();
        let mut ls = LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0);
        let sample = TransitionSample {
            from_state: 0,
            reward: -1.0,
            to_state: 99,
            uncontrolled_prob: 0.5,
            behavior_prob: 0.5,
        };
        assert!(matches!(intra_task_update(&mut ls, &d.spec, &sample, 1.0, 1.0), Err(Error::DanglingSuccessor { .. })));
    }

    #[test]
    fn trigger_sets() {
        let d = rooms();
        let cfg = RoomsConfig::default();
        let interior = cfg.state_index(1, 1);
        assert!(triggered_exits(&d.spec, interior, interior + 1, Variant::V1).is_empty());
        // leave the top-left room through its right doorway
        let (from, to) = (cfg.state_index(4, 2), cfg.state_index(5, 2));
        let v1 = triggered_exits(&d.spec, from, to, Variant::V1);
        let v2 = triggered_exits(&d.spec, from, to, Variant::V2);
        let v3 = triggered_exits(&d.spec, from, to, Variant::V3);
        assert_eq!(v1.len(), 1);
        assert_eq!(v2.len(), 2);
        assert_eq!(v3.len(), 8);
        assert!(v1.iter().all(|e| v2.contains(e)) && v2.iter().all(|e| v3.contains(e)));
        // goal room also has two non-terminal exits
        let g = cfg.goal_state();
        assert_eq!(triggered_exits(&d.spec, g, 100, Variant::V2).len(), 2);
    }

    fn two_cell() -> (Lmdp<f64>, PartitionSpec, Vec<SubtaskTemplate<f64>>) {
        let m = Lmdp::new(
            2,
            2,
            vec![vec![(1, 0.5), (2, 0.5)], vec![(0, 0.5), (3, 0.5)]],
            vec![-1.0, -1.0],
            vec![0.0, -1.0],
        )
        .unwrap();
        let (spec, templates) = induce_partition(&m, &PartitionInput::single(&m)).unwrap();
        (m, spec, templates)
    }

    #[test]
    fn intra_task_learning_recovers_bases() {
        let (m, spec, templates) = two_cell();
        let exact = solve_bases(&templates, &SolveConfig::default()).unwrap();
        let truth = solve_flat(&m, &SolveConfig::default()).unwrap().to_values(1.0)[..2].to_vec();
        let cfg = LearnConfig {
            max_episodes: 200_000,
            c_base: 500.0,
            evaluation_period: 200_000,
            ..LearnConfig::default()
        };
        let out = train(&m, &spec, &templates, &cfg, &truth).unwrap();
        for k in 0..2 {
            for l in 0..2 {
                let (a, b) = (out.state.base_estimates.class(0).get(k, l), exact.class(0).get(k, l));
                assert!((a - b).abs() < 0.01, "base {k} local {l}: {a} vs {b}");
            }
        }
        // the greedy policy samples the composed value with no variance
        assert!(out.trace.final_mae().unwrap() < 1e-8);
    }

    #[test]
    fn zero_episodes_is_a_no_op() {
        let d = rooms();
        let t = truth(&d);
        let cfg = LearnConfig {
            max_episodes: 0,
            ..LearnConfig::default()
        };
        let out = train(&d.lmdp, &d.spec, &d.templates, &cfg, &t).unwrap();
        assert!(out.trace.points.is_empty());
        assert_eq!(out.state, LearnerState::new(&d.lmdp, &d.spec, &d.templates, 1.0));
    }

    #[test]
    fn deterministic_and_budgeted() {
        let d = rooms();
        let t = truth(&d);
        let cfg = LearnConfig {
            max_episodes: 200,
            evaluation_period: 50,
            seed: 9,
            ..LearnConfig::default()
        };
        let a = train(&d.lmdp, &d.spec, &d.templates, &cfg, &t).unwrap();
        let b = train(&d.lmdp, &d.spec, &d.templates, &cfg, &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.points.len(), 4);
        assert!(a.state.base_estimates.classes[0].base(0).iter().all(|&z| z >= 0.0));
        let capped = LearnConfig {
            max_total_steps: Some(500),
            ..cfg
        };
        let c = train(&d.lmdp, &d.spec, &d.templates, &capped, &t).unwrap();
        assert_eq!(c.state.steps, 500);
        assert_eq!(c.trace.points.last().unwrap().steps, 500);
        let csv = a.trace.to_csv("V3", 9);
        assert!(csv.starts_with("steps,episode,variant,seed,mae\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn config_errors() {
        let d = rooms();
        let t = truth(&d);
        let bad = LearnConfig {
            c_exit: 0.0,
            ..LearnConfig::default()
        };
        assert!(matches!(train(&d.lmdp, &d.spec, &d.templates, &bad, &t), Err(Error::Config(_))));
        let bad = LearnConfig::<f64> {
            start: StartDistribution::Weights(vec![1.0; 3]),
            ..LearnConfig::default()
        };
        assert!(train(&d.lmdp, &d.spec, &d.templates, &bad, &t).is_err());
    }
}
