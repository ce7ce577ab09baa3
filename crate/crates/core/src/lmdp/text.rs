//! Plain-text LMDP documents.
//!
//! ```text
//! lmdp <S> <T> <lambda_default>
//! P <s> <s'> <prob>
//! R <s> <reward>
//! J <t> <reward>
//! ```
//!
//! `s` ranges over `0..S`, `s'` over `0..S+T` and `t` over `S..S+T`.
//! Blank lines and lines starting with `#` are ignored. Terminal rewards
//! accept `-inf`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Lmdp;

/// A parsed document: the problem plus its suggested temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct LmdpDocument<T> {
    pub lmdp: Lmdp<T>,
    pub lambda: T,
}

struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
}

impl<'a> Tokens<'a> {
    fn split(line: usize, text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(b)) => {
                    items.push((b + 1, &text[b..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            items.push((b + 1, &text[b..]));
        }
        Tokens { line, items }
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        if self.items.len() != n {
            let col = self.items.get(n).map_or(1, |t| t.0);
            return Err(Error::parse(
                self.line,
                col,
                format!("expected {n} fields, found {}", self.items.len()),
            ));
        }
        Ok(())
    }

    fn index(&self, i: usize, bound: std::ops::Range<usize>) -> Result<usize> {
        let (col, tok) = self.items[i];
        let v: usize = tok
            .parse()
            .map_err(|_| Error::parse(self.line, col, format!("invalid index `{tok}`")))?;
        if !bound.contains(&v) {
            return Err(Error::parse(
                self.line,
                col,
                format!("index {v} outside {}..{}", bound.start, bound.end),
            ));
        }
        Ok(v)
    }

    fn number<T: Scalar>(&self, i: usize) -> Result<T> {
        let (col, tok) = self.items[i];
        tok.parse::<T>()
            .map_err(|_| Error::parse(self.line, col, format!("invalid number `{tok}`")))
    }
}

pub fn parse_lmdp<T: Scalar>(text: &str) -> Result<LmdpDocument<T>> {
    let mut header: Option<(usize, usize, T)> = None;
    let mut rows: Vec<Vec<(usize, T)>> = Vec::new();
    let mut rewards: Vec<Option<T>> = Vec::new();
    let mut terminal: Vec<Option<T>> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = Tokens::split(line, raw);
        let (col, kind) = toks.items[0];
        match (kind, header) {
            ("lmdp", None) => {
                toks.expect_len(4)?;
                let s = toks.index(1, 0..usize::MAX)?;
                let t = toks.index(2, 0..usize::MAX)?;
                let lambda: T = toks.number(3)?;
                if !(lambda > T::zero()) {
                    return Err(Error::parse(line, toks.items[3].0, "lambda must be positive"));
                }
                header = Some((s, t, lambda));
                rows = vec![Vec::new(); s];
                rewards = vec![None; s];
                terminal = vec![None; t];
            }
            ("lmdp", Some(_)) => return Err(Error::parse(line, col, "duplicate header")),
            (_, None) => return Err(Error::parse(line, col, "expected `lmdp S T lambda` header")),
            ("P", Some((s_n, t_n, _))) => {
                toks.expect_len(4)?;
                let s = toks.index(1, 0..s_n)?;
                let next = toks.index(2, 0..s_n + t_n)?;
                let p: T = toks.number(3)?;
                if rows[s].iter().any(|&(n, _)| n == next) {
                    return Err(Error::parse(line, toks.items[2].0, format!("duplicate transition {s} -> {next}")));
                }
                rows[s].push((next, p));
            }
            ("R", Some((s_n, _, _))) => {
                toks.expect_len(3)?;
                let s = toks.index(1, 0..s_n)?;
                rewards[s] = Some(toks.number(2)?);
            }
            ("J", Some((s_n, t_n, _))) => {
                toks.expect_len(3)?;
                let t = toks.index(1, s_n..s_n + t_n)?;
                terminal[t - s_n] = Some(toks.number(2)?);
            }
            (other, Some(_)) => return Err(Error::parse(line, col, format!("unknown record `{other}`"))),
        }
    }

    let (s_n, t_n, lambda) = header.ok_or_else(|| Error::parse(1, 1, "missing `lmdp` header"))?;
    let last = text.lines().count().max(1);
    let rewards = rewards
        .into_iter()
        .enumerate()
        .map(|(s, r)| r.ok_or_else(|| Error::parse(last, 1, format!("missing reward for state {s}"))))
        .collect::<Result<Vec<T>>>()?;
    let terminal = terminal
        .into_iter()
        .enumerate()
        .map(|(t, r)| r.ok_or_else(|| Error::parse(last, 1, format!("missing reward for terminal {}", s_n + t))))
        .collect::<Result<Vec<T>>>()?;
    let lmdp = Lmdp::new(s_n, t_n, rows, rewards, terminal)?;
    Ok(LmdpDocument { lmdp, lambda })
}

/// Serializes with shortest round-trip number formatting.
pub fn write_lmdp<T: Scalar>(lmdp: &Lmdp<T>, lambda: T) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lmdp {} {} {}", lmdp.n_states(), lmdp.n_terminal(), lambda);
    for s in 0..lmdp.n_states() {
        for &(next, p) in lmdp.row(s) {
            let _ = writeln!(out, "P {s} {next} {p}");
        }
    }
    for s in 0..lmdp.n_states() {
        let _ = writeln!(out, "R {s} {}", lmdp.state_reward(s));
    }
    for t in lmdp.n_states()..lmdp.n_total() {
        let _ = writeln!(out, "J {t} {}", lmdp.terminal_reward(t));
    }
    out
}
