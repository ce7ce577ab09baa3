use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Lmdp, SolveConfig, ZVector};

/// Outcome of a converged power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    /// Largest scaled change in the last sweep (see [`SolveConfig::tol`]).
    pub residual: f64,
}

/// One application of the linear Bellman operator:
/// `z'(s) = exp(R(s) / lambda) * sum_s' P(s'|s) z(s')` for every non-terminal `s`.
pub fn bellman_backup<T: Scalar>(lmdp: &Lmdp<T>, z_plus: &ZVector<T>, cfg: &SolveConfig<T>) -> Result<ZVector<T>> {
    if z_plus.len() != lmdp.n_total() {
        return Err(Error::DimensionMismatch {
            expected: lmdp.n_total(),
            actual: z_plus.len(),
        });
    }
    let mut out = vec![T::zero(); lmdp.n_states()];
    backup_into(lmdp, z_plus.as_slice(), &mut out, cfg.lambda);
    Ok(ZVector(out))
}

fn backup_into<T: Scalar>(lmdp: &Lmdp<T>, z_plus: &[T], out: &mut [T], lambda: T) {
    for (s, slot) in out.iter_mut().enumerate() {
        let expect: T = lmdp.row(s).iter().map(|&(succ, p)| p * z_plus[succ]).sum();
        *slot = (lmdp.state_reward(s) / lambda).exp() * expect;
    }
}

/// Scaled change used by the stopping rule: `|new - old| / min(1, |new|)`.
///
/// Entries that decay to zero keep a large scaled change until they reach
/// exactly zero, so small values are resolved to full relative precision.
fn scaled_change<T: Scalar>(old: T, new: T) -> T {
    let scale = new.abs().min(T::one()).max(T::min_positive_value());
    (new - old).abs() / scale
}

/// Generic power iteration `x <- step(x)` until every entry's scaled change
/// is at most `cfg.tol`.
pub fn power_iterate<T, F>(init: Vec<T>, cfg: &SolveConfig<T>, mut step: F) -> Result<(Vec<T>, Convergence)>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    cfg.check()?;
    let mut cur = init;
    let mut next = cur.clone();
    let mut residual = T::infinity();
    for it in 1..=cfg.max_iters {
        step(&cur, &mut next);
        residual = cur
            .iter()
            .zip(&next)
            .map(|(&a, &b)| scaled_change(a, b))
            .fold(T::zero(), T::max);
        std::mem::swap(&mut cur, &mut next);
        if residual <= cfg.tol {
            // Subnormal leftovers of entries decaying to zero are flushed.
            for x in cur.iter_mut() {
                if x.abs() < T::min_positive_value() {
                    *x = T::zero();
                }
            }
            return Ok((
                cur,
                Convergence {
                    iterations: it,
                    residual: residual.to_f64().unwrap_or(f64::NAN),
                },
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Optimal z over all states by power iteration from `z = 1`, terminals pinned.
pub fn solve_flat<T: Scalar>(lmdp: &Lmdp<T>, cfg: &SolveConfig<T>) -> Result<ZVector<T>> {
    solve_flat_detailed(lmdp, cfg).map(|(z, _)| z)
}

pub fn solve_flat_detailed<T: Scalar>(lmdp: &Lmdp<T>, cfg: &SolveConfig<T>) -> Result<(ZVector<T>, Convergence)> {
    cfg.check()?;
    let n = lmdp.n_states();
    let init = lmdp.initial_z(T::one(), cfg.lambda).0;
    let lambda = cfg.lambda;
    let (z, conv) = power_iterate(init, cfg, |cur, next| {
        backup_into(lmdp, cur, &mut next[..n], lambda);
        next[n..].copy_from_slice(&cur[n..]);
    })?;
    Ok((ZVector(z), conv))
}
