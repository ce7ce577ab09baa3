//! Two-level decomposition of an LMDP into subtasks.
//!
//! The non-terminal states are partitioned; each partition induces a
//! subtask whose terminals are the outside states reachable in one step.
//! Partitions with identical local dynamics (through a bijection onto a
//! shared local indexing) form an equivalence class represented by one
//! [`SubtaskTemplate`]. A template's terminal *slots* are the union of its
//! members' terminals; a member that lacks a slot, or whose slot leads to a
//! blocked terminal (`J = -inf`), contributes value zero through it.
//!
//! Values are then represented by the base LMDP solutions of each class
//! (one per slot, see [`bases`]) plus one value per exit state (see
//! [`exits`]).

mod bases;
mod exits;
mod text;

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::lmdp::Lmdp;
use crate::scalar::Scalar;

pub use bases::{
    build_base_lmdps, compose_state_value, solve_bases, solve_class_bases, BaseValueSet, ClassBaseValues,
};
pub use exits::{
    build_exit_system, decomposition_size, solve_exit_system, solve_exit_system_from, solve_hierarchical,
    DecompositionSize, ExitSystem, HierarchicalSolution,
};
pub use text::{parse_partition, write_partition};

/// Successor of a template state: another local state or a terminal slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalTarget {
    State(usize),
    Slot(usize),
}

/// Shared local dynamics of one equivalence class.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskTemplate<T> {
    pub class: usize,
    pub n_local: usize,
    pub n_slots: usize,
    /// Per local state, successors sorted with states before slots.
    pub rows: Vec<Vec<(LocalTarget, T)>>,
    pub rewards: Vec<T>,
}

impl<T: Scalar> SubtaskTemplate<T> {
    /// The subtask as a stand-alone LMDP: slot `k` becomes terminal `n_local + k`.
    pub fn to_lmdp(&self, slot_rewards: Vec<T>) -> Result<Lmdp<T>> {
        if slot_rewards.len() != self.n_slots {
            return Err(Error::DimensionMismatch {
                expected: self.n_slots,
                actual: slot_rewards.len(),
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(target, p)| match target {
                        LocalTarget::State(l) => (l, p),
                        LocalTarget::Slot(k) => (self.n_local + k, p),
                    })
                    .collect()
            })
            .collect();
        Lmdp::new(self.n_local, self.n_slots, rows, self.rewards.clone(), slot_rewards)
    }

    pub fn max_support(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Local states with a transition into slot `k`.
    pub fn slot_sources(&self, k: usize) -> Vec<usize> {
        (0..self.n_local)
            .filter(|&l| self.rows[l].iter().any(|&(t, _)| t == LocalTarget::Slot(k)))
            .collect()
    }
}

/// Caller-supplied description of a decomposition, before verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInput {
    /// Partition id of every non-terminal state.
    pub labels: Vec<usize>,
    /// Class id of every partition.
    pub class_of: Vec<usize>,
    /// Local (template) index of every non-terminal state.
    pub to_template: Vec<usize>,
    /// Per partition, the global state behind each template slot (`None` = absent).
    pub slots: Vec<Vec<Option<usize>>>,
}

impl PartitionInput {
    /// Whole state space as one partition; slots are the terminals in order.
    pub fn single<T: Scalar>(lmdp: &Lmdp<T>) -> Self {
        PartitionInput {
            labels: vec![0; lmdp.n_states()],
            class_of: vec![0],
            to_template: (0..lmdp.n_states()).collect(),
            slots: vec![(lmdp.n_states()..lmdp.n_total()).map(Some).collect()],
        }
    }

    /// Fills `slots` with each partition's outside successors in index order.
    ///
    /// Only meaningful when members of a class reach their outside states in
    /// the same order; [`induce_partition`] rejects the result otherwise.
    pub fn infer_slots<T: Scalar>(lmdp: &Lmdp<T>, labels: Vec<usize>, class_of: Vec<usize>, to_template: Vec<usize>) -> Self {
        let mut slots: Vec<Vec<usize>> = vec![Vec::new(); class_of.len()];
        for s in 0..lmdp.n_states() {
            let i = labels[s];
            for &(next, _) in lmdp.row(s) {
                let outside = lmdp.is_terminal(next) || labels[next] != i;
                if outside {
                    slots[i].push(next);
                }
            }
        }
        let slots = slots
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v.into_iter().map(Some).collect()
            })
            .collect();
        PartitionInput {
            labels,
            class_of,
            to_template,
            slots,
        }
    }
}

/// A verified decomposition: partitions, classes, bijections, slots and exits.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    n_states: usize,
    n_total: usize,
    partition_of: Vec<usize>,
    class_of: Vec<usize>,
    to_template: Vec<usize>,
    members: Vec<Vec<usize>>,
    class_members: Vec<Vec<usize>>,
    slot_states: Vec<Vec<Option<usize>>>,
    slot_exits: Vec<Vec<Option<usize>>>,
    exits: Vec<usize>,
    exit_index: Vec<Option<usize>>,
    partition_exits: Vec<Vec<usize>>,
}

impl PartitionSpec {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_partitions(&self) -> usize {
        self.members.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_members.len()
    }

    pub fn partition_of(&self, s: usize) -> usize {
        self.partition_of[s]
    }

    pub fn class_of_partition(&self, i: usize) -> usize {
        self.class_of[i]
    }

    pub fn class_of_state(&self, s: usize) -> usize {
        self.class_of[self.partition_of[s]]
    }

    /// Template index of non-terminal state `s`.
    pub fn local(&self, s: usize) -> usize {
        self.to_template[s]
    }

    /// Global state of partition `i` at template index `local`.
    pub fn global(&self, i: usize, local: usize) -> usize {
        self.members[i][local]
    }

    /// States of partition `i`, ordered by template index.
    pub fn states_of(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    pub fn class_members(&self, j: usize) -> &[usize] {
        &self.class_members[j]
    }

    /// Raw global image of every slot of partition `i` (blocked terminals included).
    pub fn slot_states(&self, i: usize) -> &[Option<usize>] {
        &self.slot_states[i]
    }

    /// Exit index behind every slot of partition `i`; `None` for absent or blocked slots.
    pub fn slot_exits(&self, i: usize) -> &[Option<usize>] {
        &self.slot_exits[i]
    }

    /// Slot of partition `i` whose raw image is `global`.
    pub fn slot_of(&self, i: usize, global: usize) -> Option<usize> {
        self.slot_states[i].iter().position(|&g| g == Some(global))
    }

    /// Exit states in global index order.
    pub fn exits(&self) -> &[usize] {
        &self.exits
    }

    pub fn n_exits(&self) -> usize {
        self.exits.len()
    }

    pub fn exit_index(&self, s: usize) -> Option<usize> {
        self.exit_index[s]
    }

    /// Exit `e` is a terminal of the full problem, so its value is pinned.
    pub fn is_pinned_exit(&self, e: usize) -> bool {
        self.exits[e] >= self.n_states
    }

    /// Non-terminal exits lying inside partition `i`, as exit indices.
    pub fn partition_exits(&self, i: usize) -> &[usize] {
        &self.partition_exits[i]
    }
}

fn cmp_targets<T>(a: &(LocalTarget, T), b: &(LocalTarget, T)) -> Ordering {
    a.0.cmp(&b.0)
}

/// Verifies a decomposition and builds one template per equivalence class.
///
/// The first member (lowest partition id) of each class defines the
/// template; every other member must reproduce its rows and rewards through
/// the bijection within `1e-12`.
pub fn induce_partition<T: Scalar>(lmdp: &Lmdp<T>, input: &PartitionInput) -> Result<(PartitionSpec, Vec<SubtaskTemplate<T>>)> {
    let n = lmdp.n_states();
    let n_total = lmdp.n_total();
    let PartitionInput {
        labels,
        class_of,
        to_template,
        slots,
    } = input;
    let bad = |msg: String| Err(Error::InvalidPartition(msg));

    if labels.len() != n {
        return bad(format!("{} labels for {} states", labels.len(), n));
    }
    if to_template.len() != n {
        return bad(format!("{} template indices for {} states", to_template.len(), n));
    }
    let n_parts = class_of.len();
    if slots.len() != n_parts {
        return bad(format!("{} slot maps for {} partitions", slots.len(), n_parts));
    }

    let mut members: Vec<Vec<Option<usize>>> = vec![Vec::new(); n_parts];
    let mut sizes = vec![0usize; n_parts];
    for (s, &i) in labels.iter().enumerate() {
        if i >= n_parts {
            return bad(format!("state {s} has partition {i}, only {n_parts} partitions declared"));
        }
        sizes[i] += 1;
    }
    for (i, m) in members.iter_mut().enumerate() {
        if sizes[i] == 0 {
            return bad(format!("partition {i} is empty"));
        }
        *m = vec![None; sizes[i]];
    }
    for (s, (&i, &l)) in labels.iter().zip(to_template).enumerate() {
        match members[i].get_mut(l) {
            Some(slot @ None) => *slot = Some(s),
            Some(Some(other)) => {
                return bad(format!("states {other} and {s} of partition {i} share local index {l}"));
            }
            None => return bad(format!("state {s}: local index {l} outside 0..{}", sizes[i])),
        }
    }
    let members: Vec<Vec<usize>> = members
        .into_iter()
        .map(|m| m.into_iter().map(|x| x.expect("bijection checked")).collect())
        .collect();

    let n_classes = class_of.iter().copied().max().map_or(0, |c| c + 1);
    let mut class_members = vec![Vec::new(); n_classes];
    for (i, &j) in class_of.iter().enumerate() {
        class_members[j].push(i);
    }
    if let Some(j) = class_members.iter().position(Vec::is_empty) {
        return bad(format!("class {j} has no member"));
    }

    for (i, images) in slots.iter().enumerate() {
        for (k, &img) in images.iter().enumerate() {
            let Some(g) = img else { continue };
            if g >= n_total {
                return bad(format!("partition {i} slot {k}: state {g} out of range"));
            }
            if g < n && labels[g] == i {
                return bad(format!("partition {i} slot {k}: state {g} lies inside the partition"));
            }
            if images[..k].contains(&Some(g)) {
                return bad(format!("partition {i}: state {g} appears in two slots"));
            }
        }
    }

    // Local row of a member state, or the first dangling successor.
    let local_row = |i: usize, s: usize| -> Result<Vec<(LocalTarget, T)>> {
        let mut row = Vec::with_capacity(lmdp.row(s).len());
        for &(next, p) in lmdp.row(s) {
            let target = if next < n && labels[next] == i {
                LocalTarget::State(to_template[next])
            } else {
                match slots[i].iter().position(|&g| g == Some(next)) {
                    Some(k) => LocalTarget::Slot(k),
                    None => {
                        return Err(Error::DanglingSuccessor {
                            partition: i,
                            state: s,
                            successor: next,
                        })
                    }
                }
            };
            row.push((target, p));
        }
        row.sort_by(cmp_targets);
        Ok(row)
    };

    let tol = T::prob_tol();
    let mut templates = Vec::with_capacity(n_classes);
    for (j, parts) in class_members.iter().enumerate() {
        let first = parts[0];
        let n_local = members[first].len();
        let n_slots = slots[first].len();
        let mut rows = Vec::with_capacity(n_local);
        let mut rewards = Vec::with_capacity(n_local);
        for &s in &members[first] {
            rows.push(local_row(first, s)?);
            rewards.push(lmdp.state_reward(s));
        }
        let template = SubtaskTemplate {
            class: j,
            n_local,
            n_slots,
            rows,
            rewards,
        };
        for &i in &parts[1..] {
            if members[i].len() != n_local {
                return Err(Error::NotEquivalent {
                    partition: i,
                    state: members[i][0],
                    detail: format!("{} states, template has {n_local}", members[i].len()),
                });
            }
            if slots[i].len() != n_slots {
                return Err(Error::NotEquivalent {
                    partition: i,
                    state: members[i][0],
                    detail: format!("{} slots, template has {n_slots}", slots[i].len()),
                });
            }
            for (l, &s) in members[i].iter().enumerate() {
                let row = local_row(i, s)?;
                let expected = &template.rows[l];
                if let Some(detail) = row_mismatch(&row, expected, tol) {
                    return Err(Error::NotEquivalent {
                        partition: i,
                        state: s,
                        detail,
                    });
                }
                if (lmdp.state_reward(s) - template.rewards[l]).abs() > tol {
                    return Err(Error::NotEquivalent {
                        partition: i,
                        state: s,
                        detail: format!("reward {} vs template {}", lmdp.state_reward(s), template.rewards[l]),
                    });
                }
            }
        }
        templates.push(template);
    }

    // Exits: every non-blocked slot image, in global index order.
    let mut exits: Vec<usize> = slots
        .iter()
        .flatten()
        .filter_map(|&g| g)
        .filter(|&g| !lmdp.is_blocked(g))
        .collect();
    exits.sort_unstable();
    exits.dedup();
    let mut exit_index = vec![None; n_total];
    for (e, &g) in exits.iter().enumerate() {
        exit_index[g] = Some(e);
    }
    let slot_exits = slots
        .iter()
        .map(|images| images.iter().map(|img| img.and_then(|g| exit_index[g])).collect())
        .collect();
    let mut partition_exits = vec![Vec::new(); n_parts];
    for (e, &g) in exits.iter().enumerate() {
        if g < n {
            partition_exits[labels[g]].push(e);
        }
    }

    let spec = PartitionSpec {
        n_states: n,
        n_total,
        partition_of: labels.clone(),
        class_of: class_of.clone(),
        to_template: to_template.clone(),
        members,
        class_members,
        slot_states: slots.clone(),
        slot_exits,
        exits,
        exit_index,
        partition_exits,
    };
    Ok((spec, templates))
}

fn row_mismatch<T: Scalar>(row: &[(LocalTarget, T)], expected: &[(LocalTarget, T)], tol: T) -> Option<String> {
    for (i, &(target, p)) in expected.iter().enumerate() {
        match row.get(i) {
            Some(&(t, q)) if t == target => {
                if (p - q).abs() > tol {
                    return Some(format!("transition to {target:?}: probability {q} vs template {p}"));
                }
            }
            Some(&(t, _)) => return Some(format!("transition to {t:?} where template has {target:?}")),
            None => return Some(format!("missing transition to {target:?}")),
        }
    }
    row.get(expected.len())
        .map(|&(t, _)| format!("extra transition to {t:?}"))
}
