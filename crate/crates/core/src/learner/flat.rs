//! Z-learning on a single table, without decomposition (Z-IS).

use crate::error::Result;
use crate::lmdp::{z_learning_step, Lmdp, PolicyRow, TransitionSample};
use crate::scalar::Scalar;

use super::{greedy_row, lr_schedule, run_episodes, Agent, Budget, LearnConfig, Trace};

/// One estimate per state, 1 on non-terminals and pinned on terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatLearner<'a, T> {
    lmdp: &'a Lmdp<T>,
    lambda: T,
    c: T,
    pub z: Vec<T>,
}

impl<'a, T: Scalar> FlatLearner<'a, T> {
    pub fn new(lmdp: &'a Lmdp<T>, lambda: T, c: T) -> Self {
        FlatLearner {
            lmdp,
            lambda,
            c,
            z: lmdp.initial_z(T::one(), lambda).0,
        }
    }
}

impl<T: Scalar> Agent<T> for FlatLearner<'_, T> {
    fn behavior(&self, s: usize) -> PolicyRow<T> {
        greedy_row(self.lmdp, s, |t| self.z[t])
    }

    fn update(&mut self, sample: &TransitionSample<T>, episode: usize) -> Result<()> {
        let s = sample.from_state;
        let alpha = lr_schedule(self.c, episode);
        self.z[s] = z_learning_step(self.z[s], sample, self.z[sample.to_state], alpha, self.lambda)?;
        Ok(())
    }

    fn values(&self) -> Vec<T> {
        self.z[..self.lmdp.n_states()]
            .iter()
            .map(|&z| if z > T::zero() { self.lambda * z.ln() } else { T::neg_infinity() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatOutcome<T> {
    /// Final estimates over all states, terminals included.
    pub z: Vec<T>,
    pub steps: usize,
    pub episodes: usize,
    pub trace: Trace,
}

/// Z-IS with the same episode protocol as [`super::train`]; the learning
/// rate uses `cfg.c_base` and the variant is ignored.
pub fn train_flat<T: Scalar>(lmdp: &Lmdp<T>, cfg: &LearnConfig<T>, truth: &[T]) -> Result<FlatOutcome<T>> {
    cfg.check()?;
    let mut agent = FlatLearner::new(lmdp, cfg.lambda, cfg.c_base);
    let budget = Budget {
        max_episodes: cfg.max_episodes,
        max_steps_per_episode: cfg.max_steps_per_episode.unwrap_or(10 * lmdp.n_states()),
        max_total_steps: cfg.max_total_steps,
        evaluation_period: cfg.evaluation_period,
    };
    let (trace, steps, episodes) = run_episodes(&mut agent, lmdp, truth, &budget, &cfg.start, cfg.seed)?;
    Ok(FlatOutcome {
        z: agent.z,
        steps,
        episodes,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmdp::{solve_flat, SolveConfig};

    #[test]
    fn three_state_chain_converges() {
        let m = Lmdp::new(
            3,
            1,
            vec![
                vec![(0, 0.5), (1, 0.5)],
                vec![(0, 0.5), (2, 0.5)],
                vec![(1, 0.5), (3, 0.5)],
            ],
            vec![-1.0, -0.5, -1.0],
            vec![0.0],
        )
        .unwrap();
        let truth = solve_flat(&m, &SolveConfig::default()).unwrap().to_values(1.0)[..3].to_vec();
        let cfg = LearnConfig {
            max_episodes: 20_000,
            c_base: 200.0,
            evaluation_period: 5_000,
            seed: 3,
            ..LearnConfig::default()
        };
        let out = train_flat(&m, &cfg, &truth).unwrap();
        assert!(out.trace.final_mae().unwrap() < 1e-2, "{:?}", out.trace);
        assert_eq!(out.z[3], 1.0);
        assert_eq!(out.episodes, 20_000);
        assert_eq!(out, train_flat(&m, &cfg, &truth).unwrap());
    }
}
