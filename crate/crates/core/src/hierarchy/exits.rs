//! The exit-state system `z_E = G z_E`.
//!
//! Each non-terminal exit `s` in partition `i` contributes one row: the
//! coefficient of exit `t` is `z_j^k(f(s))`, where `k` is the slot of `i`
//! whose image is `t`. Exits that are terminals of the full problem are
//! pinned at `exp(J / lambda)` and carry no row.

use crate::error::{Error, Result};
use crate::lmdp::{power_iterate, Convergence, Lmdp, SolveConfig, ZVector};
use crate::scalar::Scalar;

use super::bases::{compose_state_value, solve_bases, BaseValueSet};
use super::{PartitionSpec, SubtaskTemplate};

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSystem<T> {
    /// Global state of every exit, in index order.
    pub exits: Vec<usize>,
    /// Pinned value of terminal exits, `None` for solved ones.
    pub pins: Vec<Option<T>>,
    /// Sparse row over exit indices for every non-terminal exit, keyed by exit index.
    pub rows: Vec<(usize, Vec<(usize, T)>)>,
}

impl<T: Scalar> ExitSystem<T> {
    pub fn n_exits(&self) -> usize {
        self.exits.len()
    }

    pub fn n_pinned(&self) -> usize {
        self.pins.iter().filter(|p| p.is_some()).count()
    }

    /// Largest row sum of `G` (at most one when the bases are exact).
    pub fn max_row_sum(&self) -> T {
        self.rows
            .iter()
            .map(|(_, row)| row.iter().map(|&(_, g)| g).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// One sweep `z <- G z` with pins held constant.
    pub fn apply(&self, z: &[T], out: &mut [T]) {
        for (e, pin) in self.pins.iter().enumerate() {
            if let Some(p) = pin {
                out[e] = *p;
            }
        }
        for (e, row) in &self.rows {
            out[*e] = row.iter().map(|&(t, g)| g * z[t]).sum();
        }
    }

    /// Starting point with ones on solved exits and pins elsewhere.
    pub fn initial(&self) -> Vec<T> {
        self.pins.iter().map(|p| p.unwrap_or_else(T::one)).collect()
    }
}

pub fn build_exit_system<T: Scalar>(spec: &PartitionSpec, bases: &BaseValueSet<T>, lmdp: &Lmdp<T>, lambda: T) -> Result<ExitSystem<T>> {
    let mut pins = Vec::with_capacity(spec.n_exits());
    let mut rows = Vec::new();
    for (e, &g) in spec.exits().iter().enumerate() {
        if g >= lmdp.n_total() {
            return Err(Error::UncoveredExit(g));
        }
        if lmdp.is_terminal(g) {
            pins.push(Some(lmdp.terminal_z(g, lambda)));
            continue;
        }
        if g >= spec.n_states() {
            return Err(Error::UncoveredExit(g));
        }
        pins.push(None);
        let i = spec.partition_of(g);
        let class = bases.class(spec.class_of_partition(i));
        let local = spec.local(g);
        let mut row: Vec<(usize, T)> = spec
            .slot_exits(i)
            .iter()
            .enumerate()
            .filter_map(|(k, t)| t.map(|t| (t, class.get(k, local))))
            .collect();
        row.sort_by_key(|&(t, _)| t);
        rows.push((e, row));
    }
    Ok(ExitSystem {
        exits: spec.exits().to_vec(),
        pins,
        rows,
    })
}

pub fn solve_exit_system<T: Scalar>(sys: &ExitSystem<T>, cfg: &SolveConfig<T>) -> Result<Vec<T>> {
    solve_exit_system_from(sys, cfg, sys.initial()).map(|(z, _)| z)
}

/// Power iteration on the exit system from a caller-chosen start; pinned
/// entries of `init` are overwritten by their pins.
pub fn solve_exit_system_from<T: Scalar>(sys: &ExitSystem<T>, cfg: &SolveConfig<T>, mut init: Vec<T>) -> Result<(Vec<T>, Convergence)> {
    if init.len() != sys.n_exits() {
        return Err(Error::DimensionMismatch {
            expected: sys.n_exits(),
            actual: init.len(),
        });
    }
    for (e, pin) in sys.pins.iter().enumerate() {
        if let Some(p) = pin {
            init[e] = *p;
        }
    }
    power_iterate(init, cfg, |cur, next| sys.apply(cur, next))
}

/// Result of the model-based hierarchical solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalSolution<T> {
    pub bases: BaseValueSet<T>,
    pub system: ExitSystem<T>,
    pub exit_values: Vec<T>,
    /// Composed values on non-terminals, pins on terminals.
    pub z: ZVector<T>,
}

/// Solves all base LMDPs, then the exit system, then composes every state.
pub fn solve_hierarchical<T: Scalar>(
    lmdp: &Lmdp<T>,
    spec: &PartitionSpec,
    templates: &[SubtaskTemplate<T>],
    cfg: &SolveConfig<T>,
) -> Result<HierarchicalSolution<T>> {
    let bases = solve_bases(templates, cfg)?;
    let system = build_exit_system(spec, &bases, lmdp, cfg.lambda)?;
    let exit_values = solve_exit_system(&system, cfg)?;
    let mut z = lmdp.initial_z(T::zero(), cfg.lambda);
    for s in 0..lmdp.n_states() {
        z.0[s] = compose_state_value(spec, &bases, &exit_values, s);
    }
    Ok(HierarchicalSolution {
        bases,
        system,
        exit_values,
        z,
    })
}

/// Storage and per-iteration cost of a decomposition versus the flat solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompositionSize {
    /// Equivalence classes `C`.
    pub classes: usize,
    /// Largest template `K`.
    pub max_local: usize,
    /// Largest slot count `N`.
    pub max_slots: usize,
    /// Largest template row support.
    pub support: usize,
    /// Exit count `E`.
    pub exit_count: usize,
    /// `C * N`.
    pub n_bases: usize,
    /// `C * K * N + E`.
    pub stored_values: usize,
    /// `C * N * B * K + N * E`.
    pub periter_cost: usize,
    /// Flat states `S`.
    pub flat_states: usize,
    /// `B * S` for the flat solver, `B` from the full problem.
    pub flat_cost: usize,
}

pub fn decomposition_size<T: Scalar>(spec: &PartitionSpec, templates: &[SubtaskTemplate<T>], lmdp: &Lmdp<T>) -> DecompositionSize {
    let c = spec.n_classes();
    let k = templates.iter().map(|t| t.n_local).max().unwrap_or(0);
    let n = templates.iter().map(|t| t.n_slots).max().unwrap_or(0);
    let b = templates.iter().map(SubtaskTemplate::max_support).max().unwrap_or(0);
    let e = spec.n_exits();
    DecompositionSize {
        classes: c,
        max_local: k,
        max_slots: n,
        support: b,
        exit_count: e,
        n_bases: c * n,
        stored_values: c * k * n + e,
        periter_cost: c * n * b * k + n * e,
        flat_states: lmdp.n_states(),
        flat_cost: lmdp.max_support() * lmdp.n_states(),
    }
}
