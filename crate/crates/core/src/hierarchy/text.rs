//! Partition files.
//!
//! ```text
//! p <state> <partition> <local_index>
//! c <partition> <class>
//! t <partition> <slot> <global_state|ABSENT>
//! ```
//!
//! Every non-terminal state needs a `p` line and every partition a `c`
//! line; slots of a partition must be numbered `0..n` without gaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{PartitionInput, PartitionSpec};

fn field(line: usize, toks: &[(usize, &str)], i: usize) -> Result<usize> {
    let (col, tok) = toks[i];
    tok.parse()
        .map_err(|_| Error::parse(line, col, format!("invalid integer `{tok}`")))
}

fn columns(raw: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut rest = raw;
    let mut offset = 0;
    while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        out.push((offset + start + 1, &tail[..len]));
        offset += start + len;
        rest = &tail[len..];
    }
    out
}

pub fn parse_partition(text: &str, n_states: usize) -> Result<PartitionInput> {
    let mut labels: Vec<Option<(usize, usize)>> = vec![None; n_states];
    let mut classes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut slots: BTreeMap<usize, BTreeMap<usize, Option<usize>>> = BTreeMap::new();
    let mut last_line = 1;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = columns(raw);
        let want = match toks[0].1 {
            "p" | "t" => 4,
            "c" => 3,
            other => return Err(Error::parse(line, toks[0].0, format!("unknown record `{other}`"))),
        };
        if toks.len() != want {
            return Err(Error::parse(line, toks[0].0, format!("expected {want} fields, found {}", toks.len())));
        }
        match toks[0].1 {
            "p" => {
                let s = field(line, &toks, 1)?;
                if s >= n_states {
                    return Err(Error::parse(line, toks[1].0, format!("state {s} is not a non-terminal")));
                }
                if labels[s].is_some() {
                    return Err(Error::parse(line, toks[1].0, format!("state {s} assigned twice")));
                }
                labels[s] = Some((field(line, &toks, 2)?, field(line, &toks, 3)?));
            }
            "c" => {
                let i = field(line, &toks, 1)?;
                if classes.insert(i, field(line, &toks, 2)?).is_some() {
                    return Err(Error::parse(line, toks[1].0, format!("partition {i} classed twice")));
                }
            }
            _ => {
                let i = field(line, &toks, 1)?;
                let k = field(line, &toks, 2)?;
                let image = match toks[3].1 {
                    "ABSENT" => None,
                    _ => Some(field(line, &toks, 3)?),
                };
                if slots.entry(i).or_default().insert(k, image).is_some() {
                    return Err(Error::parse(line, toks[2].0, format!("slot {k} of partition {i} given twice")));
                }
            }
        }
    }

    let mut out_labels = Vec::with_capacity(n_states);
    let mut to_template = Vec::with_capacity(n_states);
    for (s, entry) in labels.into_iter().enumerate() {
        let (i, l) = entry.ok_or_else(|| Error::parse(last_line, 1, format!("state {s} has no `p` line")))?;
        out_labels.push(i);
        to_template.push(l);
    }
    let n_parts = out_labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut class_of = Vec::with_capacity(n_parts);
    let mut out_slots = Vec::with_capacity(n_parts);
    for i in 0..n_parts {
        class_of.push(
            *classes
                .get(&i)
                .ok_or_else(|| Error::parse(last_line, 1, format!("partition {i} has no `c` line")))?,
        );
        let map = slots.remove(&i).unwrap_or_default();
        if let Some((_, &k)) = map.keys().enumerate().find(|&(pos, &k)| pos != k) {
            return Err(Error::parse(last_line, 1, format!("partition {i}: slots not numbered contiguously near {k}")));
        }
        out_slots.push(map.into_values().collect());
    }
    if let Some(&i) = classes.keys().find(|&&i| i >= n_parts) {
        return Err(Error::parse(last_line, 1, format!("`c` line for unknown partition {i}")));
    }
    Ok(PartitionInput {
        labels: out_labels,
        class_of,
        to_template,
        slots: out_slots,
    })
}

/// Writes a verified decomposition. Slots leading to blocked terminals are
/// written as `ABSENT`, like slots a partition never realizes.
pub fn write_partition(spec: &PartitionSpec) -> String {
    let mut out = String::new();
    for s in 0..spec.n_states() {
        let _ = writeln!(out, "p {s} {} {}", spec.partition_of(s), spec.local(s));
    }
    for i in 0..spec.n_partitions() {
        let _ = writeln!(out, "c {i} {}", spec.class_of_partition(i));
    }
    for i in 0..spec.n_partitions() {
        for (k, e) in spec.slot_exits(i).iter().enumerate() {
            match e {
                Some(e) => {
                    let _ = writeln!(out, "t {i} {k} {}", spec.exits()[*e]);
                }
                None => {
                    let _ = writeln!(out, "t {i} {k} ABSENT");
                }
            }
        }
    }
    out
}
