//! Base LMDPs and compositional state values.
//!
//! Base `k` of a class shares the template's states, dynamics and rewards
//! and pins the terminal boundary to the indicator of slot `k`. Since the
//! Bellman equation is linear in `z`, the value of any boundary assignment
//! `w` is `sum_k w_k z^k`.

use rayon::prelude::*;

use crate::error::Result;
use crate::lmdp::{solve_flat, Lmdp, SolveConfig};
use crate::scalar::Scalar;

use super::{PartitionSpec, SubtaskTemplate};

/// `n_slots x n_local` table of base values for one class.
///
/// The terminal boundary (1 on the own slot, 0 elsewhere) is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBaseValues<T> {
    n_local: usize,
    n_slots: usize,
    values: Vec<T>,
}

impl<T: Scalar> ClassBaseValues<T> {
    pub fn filled(n_slots: usize, n_local: usize, value: T) -> Self {
        ClassBaseValues {
            n_local,
            n_slots,
            values: vec![value; n_slots * n_local],
        }
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn get(&self, k: usize, local: usize) -> T {
        self.values[k * self.n_local + local]
    }

    pub fn set(&mut self, k: usize, local: usize, value: T) {
        self.values[k * self.n_local + local] = value;
    }

    /// Base `k` over the local non-terminal states.
    pub fn base(&self, k: usize) -> &[T] {
        &self.values[k * self.n_local..(k + 1) * self.n_local]
    }

    /// Boundary value of base `k` at slot `slot`.
    pub fn boundary(&self, k: usize, slot: usize) -> T {
        if k == slot {
            T::one()
        } else {
            T::zero()
        }
    }

    /// `sum_k z^k(local)`; at most one for exact solutions.
    pub fn slot_sum(&self, local: usize) -> T {
        (0..self.n_slots).map(|k| self.get(k, local)).sum()
    }

    /// `sum_k w_k z^k(local)`.
    pub fn combine(&self, weights: &[T], local: usize) -> T {
        weights.iter().enumerate().map(|(k, &w)| w * self.get(k, local)).sum()
    }
}

/// Base values of every class, indexed by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseValueSet<T> {
    pub classes: Vec<ClassBaseValues<T>>,
}

impl<T: Scalar> BaseValueSet<T> {
    /// Every base value set to `value` (the learner starts from 1).
    pub fn filled(templates: &[SubtaskTemplate<T>], value: T) -> Self {
        BaseValueSet {
            classes: templates
                .iter()
                .map(|t| ClassBaseValues::filled(t.n_slots, t.n_local, value))
                .collect(),
        }
    }

    pub fn class(&self, j: usize) -> &ClassBaseValues<T> {
        &self.classes[j]
    }

    pub fn class_mut(&mut self, j: usize) -> &mut ClassBaseValues<T> {
        &mut self.classes[j]
    }

    /// Largest `sum_k z^k(s)` over all classes and local states.
    pub fn max_slot_sum(&self) -> T {
        self.classes
            .iter()
            .flat_map(|c| (0..c.n_local).map(move |l| c.slot_sum(l)))
            .fold(T::zero(), T::max)
    }

    /// Number of stored values, `sum_j n_j K_j`.
    pub fn stored_values(&self) -> usize {
        self.classes.iter().map(|c| c.values.len()).sum()
    }
}

/// The `n_slots` base LMDPs of a template: base `k` has `J = 0` on slot `k`
/// and `J = -inf` on every other slot.
pub fn build_base_lmdps<T: Scalar>(template: &SubtaskTemplate<T>) -> Result<Vec<Lmdp<T>>> {
    (0..template.n_slots)
        .map(|k| {
            let pins = (0..template.n_slots)
                .map(|l| if l == k { T::zero() } else { T::neg_infinity() })
                .collect();
            template.to_lmdp(pins)
        })
        .collect()
}

/// Solves the base LMDPs of one class.
pub fn solve_class_bases<T: Scalar>(template: &SubtaskTemplate<T>, cfg: &SolveConfig<T>) -> Result<ClassBaseValues<T>> {
    let bases = build_base_lmdps(template)?;
    let solved: Vec<Vec<T>> = bases
        .par_iter()
        .map(|base| solve_flat(base, cfg).map(|z| z.0[..template.n_local].to_vec()))
        .collect::<Result<_>>()?;
    Ok(ClassBaseValues {
        n_local: template.n_local,
        n_slots: template.n_slots,
        values: solved.concat(),
    })
}

/// Solves the base LMDPs of every class.
pub fn solve_bases<T: Scalar>(templates: &[SubtaskTemplate<T>], cfg: &SolveConfig<T>) -> Result<BaseValueSet<T>> {
    let classes = templates
        .par_iter()
        .map(|t| solve_class_bases(t, cfg))
        .collect::<Result<_>>()?;
    Ok(BaseValueSet { classes })
}

/// Value of non-terminal `s` from base values and per-exit values:
/// `sum_k z_E(image of slot k) z^k(f(s))`, absent or blocked slots weighted 0.
pub fn compose_state_value<T: Scalar>(spec: &PartitionSpec, bases: &BaseValueSet<T>, exit_values: &[T], s: usize) -> T {
    let i = spec.partition_of(s);
    let class = bases.class(spec.class_of_partition(i));
    let local = spec.local(s);
    spec.slot_exits(i)
        .iter()
        .enumerate()
        .filter_map(|(k, e)| e.map(|e| exit_values[e] * class.get(k, local)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{induce_partition, LocalTarget, PartitionInput};

    fn one_cell() -> SubtaskTemplate<f64> {
        SubtaskTemplate {
            class: 0,
            n_local: 1,
            n_slots: 1,
            rows: vec![vec![(LocalTarget::Slot(0), 1.0)]],
            rewards: vec![-1.0],
        }
    }

    /// Two cells in a line, slot 0 left of cell 0 and slot 1 right of cell 1.
    fn two_cell() -> SubtaskTemplate<f64> {
        SubtaskTemplate {
            class: 0,
            n_local: 2,
            n_slots: 2,
            rows: vec![
                vec![(LocalTarget::State(1), 0.5), (LocalTarget::Slot(0), 0.5)],
                vec![(LocalTarget::State(0), 0.5), (LocalTarget::Slot(1), 0.5)],
            ],
            rewards: vec![-1.0, -1.0],
        }
    }

    #[test]
    fn single_cell_single_slot() {
        let b = solve_class_bases(&one_cell(), &SolveConfig::default()).unwrap();
        assert!((b.get(0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        let lmdps = build_base_lmdps(&one_cell()).unwrap();
        assert_eq!(lmdps.len(), 1);
        assert_eq!(lmdps[0].terminal_reward(1), 0.0);
    }

    #[test]
    fn base_boundaries_form_indicator_basis() {
        let t = two_cell();
        let lmdps = build_base_lmdps(&t).unwrap();
        assert_eq!(lmdps.len(), 2);
        for (k, m) in lmdps.iter().enumerate() {
            for slot in 0..2 {
                let z = m.terminal_z(2 + slot, 1.0);
                assert_eq!(z, if slot == k { 1.0 } else { 0.0 });
            }
            assert_eq!(m.transitions(), lmdps[0].transitions());
        }
        let b = solve_class_bases(&t, &SolveConfig::default()).unwrap();
        assert_eq!(b.boundary(1, 1), 1.0);
        assert_eq!(b.boundary(0, 1), 0.0);
    }

    #[test]
    fn two_cell_bases_match_linear_solve() {
        // z0 = c(0.5 z1 + 0.5 w0), z1 = c(0.5 z0 + 0.5 w1), c = e^-1.
        // Base 0 (w = (1, 0)): z0 = 0.5c / (1 - 0.25 c^2), z1 = 0.5 c z0.
        let c = (-1.0f64).exp();
        let z0 = 0.5 * c / (1.0 - 0.25 * c * c);
        let z1 = 0.5 * c * z0;
        let b = solve_class_bases(&two_cell(), &SolveConfig::default()).unwrap();
        assert!((b.get(0, 0) - z0).abs() <= 1e-10 * z0);
        assert!((b.get(0, 1) - z1).abs() <= 1e-10 * z1);
        assert!((b.get(1, 1) - z0).abs() <= 1e-10 * z0);
        assert!(b.slot_sum(0) <= 1.0);
        assert!((b.combine(&[2.0, 3.0], 0) - (2.0 * b.get(0, 0) + 3.0 * b.get(1, 0))).abs() < 1e-15);
    }

    #[test]
    fn compose_ignores_absent_slots() {
        let m = Lmdp::new(2, 2, vec![vec![(1, 0.5), (2, 0.5)], vec![(0, 0.5), (3, 0.5)]], vec![-1.0, -1.0], vec![0.0, f64::NEG_INFINITY])
            .unwrap();
        let (spec, templates) = induce_partition(&m, &PartitionInput::single(&m)).unwrap();
        let bases = solve_bases(&templates, &SolveConfig::default()).unwrap();
        let exits = vec![1.0];
        let z = solve_flat(&m, &SolveConfig::default()).unwrap();
        for s in 0..2 {
            let c = compose_state_value(&spec, &bases, &exits, s);
            assert!((c - z[s]).abs() <= 1e-10 * z[s]);
        }
        assert_eq!(compose_state_value(&spec, &bases, &[0.0], 0), 0.0);
    }
}
