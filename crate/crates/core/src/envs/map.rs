//! ASCII grid maps.
//!
//! ```text
//! goal 0
//! reward -1
//! #########
//! #.#.....#
//! #.#.###.#
//! #.....#G#
//! #########
//! ```
//!
//! Header lines (`goal <J>`, required; `reward <r>`, optional, default -1)
//! come first. In the grid, characters at odd row and odd column are cells
//! (`.` floor, `G` floor next to the goal, `#` no cell); characters between
//! two cells are thin walls (`#`) or openings (`.`). Everything else is
//! decoration and must be `#` or `.`.
//!
//! With a partition file, slots listed `ABSENT` that other members of the
//! class do realize are routed to fresh blocked terminals, so that members
//! keep identical local dynamics.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::hierarchy::{parse_partition, PartitionInput};
use crate::lmdp::Lmdp;
use crate::scalar::Scalar;

use super::{uniform_rows, Decomposition};

/// A parsed map: cells in row-major order plus wall layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub goal_reward: f64,
    pub interior_reward: f64,
    /// Non-terminal successors of each cell, as state indices, and whether
    /// the cell touches the goal.
    successors: Vec<Vec<usize>>,
    goal_adjacent: Vec<bool>,
    /// State index of each grid position, if it is a cell.
    index: Vec<Option<usize>>,
}

impl GridMap {
    pub fn n_states(&self) -> usize {
        self.successors.len()
    }

    pub fn state_at(&self, x: usize, y: usize) -> Option<usize> {
        self.index.get(y * self.width + x).copied().flatten()
    }

    pub fn goal_terminal(&self) -> usize {
        self.n_states()
    }

    fn successor_sets(&self) -> Vec<Vec<usize>> {
        let g = self.goal_terminal();
        self.successors
            .iter()
            .zip(&self.goal_adjacent)
            .map(|(s, &adj)| {
                let mut s = s.clone();
                if adj {
                    s.push(g);
                }
                s
            })
            .collect()
    }

    pub fn to_lmdp<T: Scalar>(&self) -> Result<Lmdp<T>> {
        let n = self.n_states();
        Lmdp::new(
            n,
            1,
            uniform_rows(self.successor_sets()),
            vec![T::lit(self.interior_reward); n],
            vec![T::lit(self.goal_reward)],
        )
    }
}

fn header_value(line: usize, raw: &str, key: &str) -> Result<f64> {
    let rest = raw.trim_start()[key.len()..].trim();
    let col = raw.len() - raw.trim_start().len() + key.len() + 2;
    rest.parse()
        .map_err(|_| Error::parse(line, col, format!("invalid `{key}` value `{rest}`")))
}

pub fn parse_map(text: &str) -> Result<GridMap> {
    let mut goal = None;
    let mut reward = -1.0;
    let mut grid: Vec<(usize, &[u8])> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim_end();
        if trimmed.trim().is_empty() {
            continue;
        }
        let word = trimmed.split_whitespace().next().unwrap_or("");
        if grid.is_empty() && trimmed.starts_with(|c: char| c.is_ascii_alphabetic() && c != 'G') {
            match word {
                "goal" => goal = Some(header_value(line, trimmed, "goal")?),
                "reward" => reward = header_value(line, trimmed, "reward")?,
                other => return Err(Error::parse(line, 1, format!("unknown header `{other}`"))),
            }
            continue;
        }
        if let Some(col) = trimmed.bytes().position(|b| !matches!(b, b'#' | b'.' | b'G')) {
            return Err(Error::parse(line, col + 1, format!("unexpected character `{}`", &trimmed[col..].chars().next().unwrap())));
        }
        grid.push((line, trimmed.as_bytes()));
    }
    let goal_reward = goal.ok_or_else(|| Error::parse(1, 1, "missing `goal` header"))?;
    if !(reward < 0.0) {
        return Err(Error::parse(1, 1, "interior reward must be negative"));
    }
    let Some(&(first_line, first)) = grid.first() else {
        return Err(Error::parse(1, 1, "empty map"));
    };
    let cols = first.len();
    for (row, &(line, bytes)) in grid.iter().enumerate() {
        if bytes.len() != cols {
            return Err(Error::parse(
                line,
                bytes.len().min(cols) + 1,
                format!("row {row} has length {}, expected {cols}", bytes.len()),
            ));
        }
    }
    if cols % 2 == 0 || grid.len() % 2 == 0 || cols < 3 || grid.len() < 3 {
        return Err(Error::parse(first_line, 1, format!("grid must have odd dimensions of at least 3, found {}x{cols}", grid.len())));
    }
    let (width, height) = (cols / 2, grid.len() / 2);
    let at = |r: usize, c: usize| grid[r].1[c];

    let mut index = vec![None; width * height];
    let mut n = 0;
    for y in 0..height {
        for x in 0..width {
            if at(2 * y + 1, 2 * x + 1) != b'#' {
                index[y * width + x] = Some(n);
                n += 1;
            }
        }
    }
    for (r, &(line, bytes)) in grid.iter().enumerate() {
        for (c, &b) in bytes.iter().enumerate() {
            if b == b'G' && (r % 2 == 0 || c % 2 == 0) {
                return Err(Error::parse(line, c + 1, "`G` must sit on a cell"));
            }
        }
    }

    let mut successors = vec![Vec::new(); n];
    let mut goal_adjacent = vec![false; n];
    for y in 0..height {
        for x in 0..width {
            let Some(s) = index[y * width + x] else { continue };
            let (r, c) = (2 * y + 1, 2 * x + 1);
            goal_adjacent[s] = at(r, c) == b'G';
            let mut link = |nx: usize, ny: usize, wall: u8| {
                if wall == b'.' {
                    if let Some(t) = index[ny * width + nx] {
                        successors[s].push(t);
                    }
                }
            };
            if x > 0 {
                link(x - 1, y, at(r, c - 1));
            }
            if x + 1 < width {
                link(x + 1, y, at(r, c + 1));
            }
            if y > 0 {
                link(x, y - 1, at(r - 1, c));
            }
            if y + 1 < height {
                link(x, y + 1, at(r + 1, c));
            }
            if successors[s].is_empty() && !goal_adjacent[s] {
                return Err(Error::parse(grid[r].0, c + 1, format!("cell ({x}, {y}) has no open neighbour")));
            }
        }
    }
    if !goal_adjacent.iter().any(|&g| g) {
        return Err(Error::parse(first_line, 1, "map has no `G` cell"));
    }
    Ok(GridMap {
        width,
        height,
        goal_reward,
        interior_reward: reward,
        successors,
        goal_adjacent,
        index,
    })
}

/// Loads a map and its decomposition; without a partition file the whole
/// map is one partition.
pub fn load_map<T: Scalar>(map_text: &str, partition_text: Option<&str>) -> Result<Decomposition<T>> {
    let map = parse_map(map_text)?;
    let Some(partition_text) = partition_text else {
        let lmdp = map.to_lmdp()?;
        return Decomposition::new(lmdp.clone(), &PartitionInput::single(&lmdp));
    };
    let n = map.n_states();
    let mut input = parse_partition(partition_text, n)?;
    let mut succ = map.successor_sets();
    let mut terminal_reward = vec![T::lit(map.goal_reward)];
    pad_absent_slots(&mut succ, &mut input, &mut terminal_reward, n);
    let n_terminal = terminal_reward.len();
    let lmdp = Lmdp::new(n, n_terminal, uniform_rows(succ), vec![T::lit(map.interior_reward); n], terminal_reward)?;
    Decomposition::new(lmdp, &input)
}

/// Routes every `ABSENT` slot that another class member realizes to a new
/// blocked terminal, attached to the same local sources.
fn pad_absent_slots<T: Scalar>(succ: &mut [Vec<usize>], input: &mut PartitionInput, terminal_reward: &mut Vec<T>, n: usize) {
    let n_parts = input.slots.len();
    let mut by_local: HashMap<(usize, usize), usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_parts];
    for s in 0..n {
        let i = input.labels[s];
        by_local.insert((i, input.to_template[s]), s);
        if i < n_parts {
            members[i].push(s);
        }
    }
    let mut sources: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
    for (i, slots) in input.slots.iter().enumerate() {
        let j = input.class_of[i];
        for (k, image) in slots.iter().enumerate() {
            let Some(g) = *image else { continue };
            let entry = sources.entry((j, k)).or_default();
            for &s in &members[i] {
                if succ[s].contains(&g) {
                    entry.insert(input.to_template[s]);
                }
            }
        }
    }
    for i in 0..n_parts {
        let j = input.class_of[i];
        for k in 0..input.slots[i].len() {
            if input.slots[i][k].is_some() {
                continue;
            }
            let Some(locals) = sources.get(&(j, k)).filter(|l| !l.is_empty()) else { continue };
            terminal_reward.push(T::neg_infinity());
            let b = n + terminal_reward.len() - 1;
            for l in locals {
                if let Some(&s) = by_local.get(&(i, *l)) {
                    succ[s].push(b);
                }
            }
            input.slots[i][k] = Some(b);
        }
    }
}
