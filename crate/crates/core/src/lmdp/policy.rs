use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Lmdp, PolicyRow, TransitionSample, ZVector};

/// Optimal policy at `s` given z over all states:
/// `pi(s'|s) = P(s'|s) z(s') / sum_t P(t|s) z(t)`.
///
/// Successors with `z = 0` get probability exactly zero.
pub fn policy_from_z<T: Scalar>(lmdp: &Lmdp<T>, z: &ZVector<T>, s: usize) -> Result<PolicyRow<T>> {
    if z.len() != lmdp.n_total() {
        return Err(Error::DimensionMismatch {
            expected: lmdp.n_total(),
            actual: z.len(),
        });
    }
    let row = lmdp.row(s);
    let weights: Vec<T> = row.iter().map(|&(succ, p)| p * z[succ]).collect();
    let denom: T = weights.iter().copied().sum();
    if !(denom > T::zero()) {
        return Err(Error::DeadState { state: s });
    }
    Ok(PolicyRow {
        entries: row.iter().zip(weights).map(|(&(succ, _), w)| (succ, w / denom)).collect(),
    })
}

/// `R(s) - lambda * KL(pi(.|s) || P(.|s))`; zero-probability entries contribute nothing.
pub fn kl_penalized_reward<T: Scalar>(lmdp: &Lmdp<T>, s: usize, pi: &PolicyRow<T>, lambda: T) -> Result<T> {
    let mut kl = T::zero();
    for &(succ, q) in &pi.entries {
        if q <= T::zero() {
            continue;
        }
        let p = lmdp.prob(s, succ);
        if p <= T::zero() {
            return Err(Error::SupportViolation { state: s, successor: succ });
        }
        kl += q * (q / p).ln();
    }
    Ok(lmdp.state_reward(s) - lambda * kl)
}

/// Importance-weighted Z-learning update of one estimate.
///
/// With `behavior_prob == uncontrolled_prob` this is the plain update
/// `(1 - alpha) z + alpha exp(r / lambda) z'`.
pub fn z_learning_step<T: Scalar>(
    z_hat_s: T,
    sample: &TransitionSample<T>,
    z_hat_next: T,
    alpha: T,
    lambda: T,
) -> Result<T> {
    if !(sample.behavior_prob > T::zero()) {
        return Err(Error::ZeroBehaviorProbability);
    }
    let weight = sample.uncontrolled_prob / sample.behavior_prob;
    let target = (sample.reward / lambda).exp() * z_hat_next * weight;
    Ok((T::one() - alpha) * z_hat_s + alpha * target)
}

/// `lambda * ln z` elementwise; `z = 0` maps to `-inf`.
pub fn v_from_z<T: Scalar>(z: &[T], lambda: T) -> Vec<T> {
    z.iter()
        .map(|&x| if x > T::zero() { lambda * x.ln() } else { T::neg_infinity() })
        .collect()
}

/// `exp(v / lambda)` elementwise; `-inf` maps to `0`.
pub fn z_from_v<T: Scalar>(v: &[T], lambda: T) -> ZVector<T> {
    ZVector(v.iter().map(|&x| (x / lambda).exp()).collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn fork(za: f64, zb: f64) -> (Lmdp<f64>, ZVector<f64>) {
        let m = Lmdp::new(1, 2, vec![vec![(1, 0.5), (2, 0.5)]], vec![-1.0], vec![0.0, 0.0]).unwrap();
        (m, ZVector(vec![0.0, za, zb]))
    }

    #[test]
    fn symmetric_successors_reproduce_p() {
        let (m, z) = fork(0.4, 0.4);
        let pi = policy_from_z(&m, &z, 0).unwrap();
        assert_eq!(pi.entries, vec![(1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn zero_value_turns_successor_off() {
        let (m, z) = fork(0.4, 0.0);
        let pi = policy_from_z(&m, &z, 0).unwrap();
        assert_eq!(pi.entries, vec![(1, 1.0), (2, 0.0)]);
    }

    #[test]
    fn policy_direct_evaluation() {
        let (m, z) = fork((-1.0f64).exp(), (-2.0f64).exp());
        let pi = policy_from_z(&m, &z, 0).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((pi.prob(1) - expected).abs() < 1e-15);
        assert!((pi.prob(1) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn dead_state_is_an_error() {
        let (m, z) = fork(0.0, 0.0);
        assert_eq!(policy_from_z(&m, &z, 0).unwrap_err(), Error::DeadState { state: 0 });
    }

    #[test]
    fn kl_reward_cases() {
        let (m, _) = fork(1.0, 1.0);
        let passive = PolicyRow { entries: vec![(1, 0.5), (2, 0.5)] };
        assert_eq!(kl_penalized_reward(&m, 0, &passive, 1.0).unwrap(), -1.0);
        let greedy = PolicyRow { entries: vec![(1, 1.0), (2, 0.0)] };
        let r = kl_penalized_reward(&m, 0, &greedy, 1.0).unwrap();
        assert!((r - (-1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((r + 1.693_147_180_559_945_4).abs() < 1e-15);

        let single = Lmdp::new(1, 1, vec![vec![(1, 1.0)]], vec![-2.5], vec![0.0]).unwrap();
        let det = PolicyRow { entries: vec![(1, 1.0)] };
        assert_eq!(kl_penalized_reward(&single, 0, &det, 3.0).unwrap(), -2.5);

        let off = PolicyRow { entries: vec![(0, 1.0)] };
        assert!(matches!(kl_penalized_reward(&m, 0, &off, 1.0), Err(Error::SupportViolation { .. })));
    }

    fn sample(unc: f64, beh: f64) -> TransitionSample<f64> {
        TransitionSample { from_state: 0, reward: -1.0, to_state: 1, uncontrolled_prob: unc, behavior_prob: beh }
    }

    #[test]
    fn z_learning_cases() {
        assert_eq!(z_learning_step(0.7, &sample(0.5, 0.5), 0.2, 0.0, 1.0).unwrap(), 0.7);
        let z = z_learning_step(1.0, &sample(0.5, 0.5), 1.0, 0.5, 1.0).unwrap();
        assert!((z - 0.683_939_720_585_721_2).abs() < 1e-15);
        assert_eq!(z_learning_step(0.9, &sample(0.5, 0.25), 0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(
            z_learning_step(0.9, &sample(0.5, 0.0), 1.0, 1.0, 1.0).unwrap_err(),
            Error::ZeroBehaviorProbability
        );
    }

    #[test]
    fn value_conversions() {
        assert_eq!(v_from_z(&[1.0], 2.0), vec![0.0]);
        assert!((z_from_v(&[-1.0], 1.0)[0] - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(v_from_z(&[0.0], 1.0), vec![f64::NEG_INFINITY]);
        assert_eq!(z_from_v(&[f64::NEG_INFINITY], 1.0).0, vec![0.0]);
    }

    /// Three non-terminals plus two terminals; state 0 branches everywhere.
    fn three_state() -> Lmdp<f64> {
        Lmdp::new(
            3,
            2,
            vec![
                vec![(0, 0.1), (1, 0.2), (2, 0.3), (3, 0.25), (4, 0.15)],
                vec![(0, 0.5), (3, 0.5)],
                vec![(1, 0.6), (4, 0.4)],
            ],
            vec![-0.5, -1.0, -2.0],
            vec![0.0, -3.0],
        )
        .unwrap()
    }

    #[test]
    fn expected_uncorrected_target_is_bellman_backup() {
        let m = three_state();
        let z = ZVector(vec![0.3, 0.6, 0.2, 1.0, (-3.0f64).exp()]);
        let backup = super::super::bellman_backup(&m, &z, &Default::default()).unwrap();
        for s in 0..3 {
            // alpha = 1 isolates the target; average it over s' ~ P exhaustively.
            let mut avg = 0.0;
            for &(next, p) in m.row(s) {
                let smp = TransitionSample {
                    from_state: s,
                    reward: m.state_reward(s),
                    to_state: next,
                    uncontrolled_prob: p,
                    behavior_prob: p,
                };
                avg += p * z_learning_step(z[s], &smp, z[next], 1.0, 1.0).unwrap();
            }
            assert!((avg - backup[s]).abs() < 1e-15, "state {s}");
        }
    }

    proptest! {
        #[test]
        fn policy_rows_normalized(zs in proptest::collection::vec(0.0f64..1.0, 5), lambda in 0.1f64..5.0) {
            let m = three_state();
            let mut z = zs.clone();
            z[3] = m.terminal_z(3, lambda);
            z[4] = m.terminal_z(4, lambda);
            let z = ZVector(z);
            for s in 0..3 {
                match policy_from_z(&m, &z, s) {
                    Ok(pi) => {
                        prop_assert!((pi.sum() - 1.0).abs() <= 1e-12);
                        for &(succ, q) in &pi.entries {
                            prop_assert!(m.prob(s, succ) > 0.0);
                            if z[succ] == 0.0 {
                                prop_assert_eq!(q, 0.0);
                            }
                        }
                    }
                    Err(e) => prop_assert_eq!(e, Error::DeadState { state: s }),
                }
            }
        }

        #[test]
        fn importance_weights_undo_behavior(
            raw in proptest::collection::vec(0.01f64..1.0, 5),
            zs in proptest::collection::vec(0.0f64..1.0, 5),
        ) {
            let m = three_state();
            let z = ZVector(zs);
            let s = 0;
            let total: f64 = raw.iter().sum();
            let behavior: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let mut corrected = 0.0;
            let mut plain = 0.0;
            for (i, &(next, p)) in m.row(s).iter().enumerate() {
                let q = behavior[i];
                let c = TransitionSample { from_state: s, reward: -0.5, to_state: next, uncontrolled_prob: p, behavior_prob: q };
                let u = TransitionSample { behavior_prob: p, ..c };
                corrected += q * z_learning_step(z[s], &c, z[next], 1.0, 1.0).unwrap();
                plain += p * z_learning_step(z[s], &u, z[next], 1.0, 1.0).unwrap();
            }
            prop_assert!((corrected - plain).abs() <= 1e-12);
        }

        #[test]
        fn value_round_trip(z in 1e-300f64..1e3, lambda in 0.01f64..10.0) {
            let v = v_from_z(&[z], lambda);
            let back = z_from_v(&v, lambda)[0];
            prop_assert!((back - z).abs() <= 1e-12 * z);
        }
    }
}
