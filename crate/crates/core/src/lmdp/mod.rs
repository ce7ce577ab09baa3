//! Linearly-solvable MDPs in exponentiated value space.
//!
//! States `0..n_states` are non-terminal and `n_states..n_states + n_terminal`
//! are terminal. Every solver works on z-values `z(s) = exp(v(s) / lambda)`;
//! `z = 0` encodes a value of negative infinity and is a legal state of
//! affairs (e.g. a terminal that must never be entered).

mod policy;
mod solve;
mod text;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use policy::{kl_penalized_reward, policy_from_z, v_from_z, z_from_v, z_learning_step};
pub use solve::{bellman_backup, power_iterate, solve_flat, solve_flat_detailed, Convergence};
pub use text::{parse_lmdp, write_lmdp, LmdpDocument};

/// Sparse row of `(successor, probability)` pairs ordered by successor index.
pub type Row<T> = Vec<(usize, T)>;

/// A first-exit LMDP with sparse uncontrolled dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmdp<T> {
    n_states: usize,
    n_terminal: usize,
    transitions: Vec<Row<T>>,
    state_reward: Vec<T>,
    terminal_reward: Vec<T>,
}

/// One broken invariant found by [`Lmdp::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch { field: &'static str, expected: usize, actual: usize },
    EmptyRow { state: usize },
    RowSum { state: usize, sum: f64 },
    ProbabilityOutOfRange { state: usize, successor: usize, prob: f64 },
    SuccessorOutOfRange { state: usize, successor: usize },
    DuplicateSuccessor { state: usize, successor: usize },
    NonNegativeReward { state: usize, reward: f64 },
    NonFiniteReward { state: usize, reward: f64 },
    InvalidTerminalReward { terminal: usize, reward: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { field, expected, actual } => {
                write!(f, "{field}: expected {expected} entries, got {actual}")
            }
            Violation::EmptyRow { state } => write!(f, "state {state}: empty transition row"),
            Violation::RowSum { state, sum } => {
                write!(f, "state {state}: row sum {sum} differs from 1")
            }
            Violation::ProbabilityOutOfRange { state, successor, prob } => {
                write!(f, "state {state}: probability {prob} of successor {successor} not in (0, 1]")
            }
            Violation::SuccessorOutOfRange { state, successor } => {
                write!(f, "state {state}: successor {successor} out of range")
            }
            Violation::DuplicateSuccessor { state, successor } => {
                write!(f, "state {state}: successor {successor} listed twice")
            }
            Violation::NonNegativeReward { state, reward } => {
                write!(f, "state {state}: nonnegative reward {reward}")
            }
            Violation::NonFiniteReward { state, reward } => {
                write!(f, "state {state}: non-finite reward {reward}")
            }
            Violation::InvalidTerminalReward { terminal, reward } => {
                write!(f, "terminal {terminal}: invalid reward {reward}")
            }
        }
    }
}

impl<T: Scalar> Lmdp<T> {
    /// Builds and validates an LMDP. Rows are sorted by successor index.
    pub fn new(
        n_states: usize,
        n_terminal: usize,
        transitions: Vec<Row<T>>,
        state_reward: Vec<T>,
        terminal_reward: Vec<T>,
    ) -> Result<Self> {
        let lmdp = Self::new_unchecked(n_states, n_terminal, transitions, state_reward, terminal_reward);
        let violations = lmdp.validate();
        if violations.is_empty() {
            Ok(lmdp)
        } else {
            let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidLmdp(text.join("; ")))
        }
    }

    /// Builds without validating; use [`Lmdp::validate`] for diagnostics.
    pub fn new_unchecked(
        n_states: usize,
        n_terminal: usize,
        mut transitions: Vec<Row<T>>,
        state_reward: Vec<T>,
        terminal_reward: Vec<T>,
    ) -> Self {
        for row in &mut transitions {
            row.sort_by_key(|&(succ, _)| succ);
        }
        Lmdp {
            n_states,
            n_terminal,
            transitions,
            state_reward,
            terminal_reward,
        }
    }

    /// Lists every broken invariant; empty iff the LMDP is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let total = self.n_total();
        if self.transitions.len() != self.n_states {
            out.push(Violation::LengthMismatch {
                field: "transitions",
                expected: self.n_states,
                actual: self.transitions.len(),
            });
        }
        if self.state_reward.len() != self.n_states {
            out.push(Violation::LengthMismatch {
                field: "state_reward",
                expected: self.n_states,
                actual: self.state_reward.len(),
            });
        }
        if self.terminal_reward.len() != self.n_terminal {
            out.push(Violation::LengthMismatch {
                field: "terminal_reward",
                expected: self.n_terminal,
                actual: self.terminal_reward.len(),
            });
        }
        for (state, row) in self.transitions.iter().enumerate() {
            if row.is_empty() {
                out.push(Violation::EmptyRow { state });
                continue;
            }
            let mut sum = T::zero();
            for (i, &(successor, prob)) in row.iter().enumerate() {
                if successor >= total {
                    out.push(Violation::SuccessorOutOfRange { state, successor });
                }
                if i > 0 && row[i - 1].0 == successor {
                    out.push(Violation::DuplicateSuccessor { state, successor });
                }
                if !(prob > T::zero() && prob <= T::one()) {
                    out.push(Violation::ProbabilityOutOfRange {
                        state,
                        successor,
                        prob: prob.to_f64().unwrap_or(f64::NAN),
                    });
                }
                sum += prob;
            }
            if !((sum - T::one()).abs() <= T::prob_tol()) {
                out.push(Violation::RowSum {
                    state,
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for (state, &r) in self.state_reward.iter().enumerate() {
            let reward = r.to_f64().unwrap_or(f64::NAN);
            if !r.is_finite() {
                out.push(Violation::NonFiniteReward { state, reward });
            } else if r >= T::zero() {
                out.push(Violation::NonNegativeReward { state, reward });
            }
        }
        for (i, &j) in self.terminal_reward.iter().enumerate() {
            // -inf is allowed: it pins z = 0 and turns the terminal off.
            if j.is_nan() || j == T::infinity() {
                out.push(Violation::InvalidTerminalReward {
                    terminal: self.n_states + i,
                    reward: j.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_terminal(&self) -> usize {
        self.n_terminal
    }

    /// Size of the full state set, terminals included.
    pub fn n_total(&self) -> usize {
        self.n_states + self.n_terminal
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        s >= self.n_states
    }

    pub fn row(&self, s: usize) -> &[(usize, T)] {
        &self.transitions[s]
    }

    pub fn transitions(&self) -> &[Row<T>] {
        &self.transitions
    }

    pub fn state_reward(&self, s: usize) -> T {
        self.state_reward[s]
    }

    pub fn state_rewards(&self) -> &[T] {
        &self.state_reward
    }

    /// Reward of terminal state `t`, indexed globally (`t >= n_states`).
    pub fn terminal_reward(&self, t: usize) -> T {
        self.terminal_reward[t - self.n_states]
    }

    pub fn terminal_rewards(&self) -> &[T] {
        &self.terminal_reward
    }

    /// Uncontrolled probability `P(next | s)`, zero off the support.
    pub fn prob(&self, s: usize, next: usize) -> T {
        let row = &self.transitions[s];
        row.binary_search_by_key(&next, |&(succ, _)| succ)
            .map(|i| row[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Largest support size over all rows.
    pub fn max_support(&self) -> usize {
        self.transitions.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Exponentiated terminal value `exp(J(t) / lambda)`.
    pub fn terminal_z(&self, t: usize, lambda: T) -> T {
        (self.terminal_reward(t) / lambda).exp()
    }

    /// Terminal with `J = -inf`, i.e. pinned at `z = 0`.
    pub fn is_blocked(&self, t: usize) -> bool {
        self.is_terminal(t) && self.terminal_reward(t) == T::neg_infinity()
    }

    /// Z-vector over all states: `init` on non-terminals, pins on terminals.
    pub fn initial_z(&self, init: T, lambda: T) -> ZVector<T> {
        let mut values = vec![init; self.n_total()];
        for t in self.n_states..self.n_total() {
            values[t] = self.terminal_z(t, lambda);
        }
        ZVector(values)
    }

    /// Stable hash of the problem data, for caching solutions.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_states.hash(&mut h);
        self.n_terminal.hash(&mut h);
        let bits = |x: T| x.to_f64().unwrap_or(f64::NAN).to_bits();
        for row in &self.transitions {
            row.len().hash(&mut h);
            for &(succ, p) in row {
                succ.hash(&mut h);
                bits(p).hash(&mut h);
            }
        }
        for &r in self.state_reward.iter().chain(&self.terminal_reward) {
            bits(r).hash(&mut h);
        }
        h.finish()
    }
}

/// Exponentiated value function over a caller-declared state set.
#[derive(Debug, Clone, PartialEq)]
pub struct ZVector<T>(pub Vec<T>);

impl<T: Scalar> ZVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Values `lambda * ln z`, with `-inf` where `z = 0`.
    pub fn to_values(&self, lambda: T) -> Vec<T> {
        v_from_z(&self.0, lambda)
    }
}

impl<T> std::ops::Index<usize> for ZVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Next-state distribution at one state, aligned with the support of `P(.|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow<T> {
    pub entries: Vec<(usize, T)>,
}

impl<T: Scalar> PolicyRow<T> {
    pub fn prob(&self, next: usize) -> T {
        self.entries
            .iter()
            .find(|&&(s, _)| s == next)
            .map(|&(_, p)| p)
            .unwrap_or_else(T::zero)
    }

    pub fn sum(&self) -> T {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: T) -> (usize, T) {
        let mut acc = T::zero();
        let mut last = None;
        for &(s, p) in &self.entries {
            if p <= T::zero() {
                continue;
            }
            acc += p;
            last = Some((s, p));
            if u < acc {
                return (s, p);
            }
        }
        // Rounding can leave `acc` a hair below one.
        last.expect("policy row has positive mass")
    }
}

/// One observed transition with the probabilities needed for an IS update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample<T> {
    pub from_state: usize,
    pub reward: T,
    pub to_state: usize,
    pub uncontrolled_prob: T,
    pub behavior_prob: T,
}

/// Temperature and stopping rule for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig<T> {
    pub lambda: T,
    /// Per-entry tolerance on successive iterates, relative to `min(1, |z|)`.
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Scalar> Default for SolveConfig<T> {
    fn default() -> Self {
        SolveConfig {
            lambda: T::one(),
            tol: T::lit(1e-10),
            max_iters: 100_000,
        }
    }
}

impl<T: Scalar> SolveConfig<T> {
    pub fn with_lambda(lambda: T) -> Self {
        SolveConfig {
            lambda,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}
