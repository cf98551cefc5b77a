/// Generalized advantage estimates by the backward recursion
/// `A_t = δ_t + γλ(1 - done_t)·A_{t+1}` with `δ_t = r_t + γ(1 - done_t)·V_{t+1} - V_t`.
///
/// `last_value` bootstraps the step after the final one; it is ignored when that final
/// step is terminal. Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(
        rewards.len() == values.len() && values.len() == dones.len(),
        "rewards, values and dones must be aligned"
    );
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = last_value;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// n-step advantage `Σ_{k<n} γ^k r_{t+k} + γ^n V_{t+n} - V_t`, truncated at the first
    /// terminal step.
    fn n_step(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64, t: usize, n: usize) -> f64 {
        let mut total = 0.0;
        let mut discount = 1.0;
        for k in 0..n {
            let i = t + k;
            if i == r.len() {
                return total + discount * last - v[t];
            }
            total += discount * r[i];
            discount *= gamma;
            if d[i] {
                return total - v[t];
            }
        }
        let boot = if t + n < v.len() { v[t + n] } else { last };
        total + discount * boot - v[t]
    }

    /// `(1 - λ) Σ_n λ^{n-1} A^{(n)}`, where every horizon reaching past the episode end
    /// equals the full return, so the tail weight collapses onto it.
    fn brute(r: &[f64], v: &[f64], d: &[bool], last: f64, gamma: f64, lambda: f64) -> Vec<f64> {
        (0..r.len())
            .map(|t| {
                let horizon = (t..r.len()).find(|&i| d[i]).map_or(r.len() - t, |i| i - t + 1);
                let mut acc = 0.0;
                for n in 1..horizon {
                    acc += (1.0 - lambda) * lambda.powi(n as i32 - 1) * n_step(r, v, d, last, gamma, t, n);
                }
                acc + lambda.powi(horizon as i32 - 1) * n_step(r, v, d, last, gamma, t, horizon)
            })
            .collect()
    }

    #[test]
    fn undiscounted_ones() {
        let (adv, ret) = compute_gae(&[1.0; 3], &[0.0; 3], &[false; 3], 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![3.0, 2.0, 1.0]);
        assert_eq!(ret, adv);
    }

    #[test]
    fn zero_rewards_and_values() {
        let (adv, _) = compute_gae(&[0.0; 5], &[0.0; 5], &[false, true, false, false, true], 0.0, 0.9, 0.8);
        assert_eq!(adv, vec![0.0; 5]);
    }

    #[test]
    fn single_step_is_one_step_td() {
        for done in [false, true] {
            let (adv, ret) = compute_gae(&[0.7], &[0.2], &[done], 1.5, 0.9, 0.3);
            let expected = 0.7 + 0.9 * 1.5 * if done { 0.0 } else { 1.0 } - 0.2;
            assert!((adv[0] - expected).abs() < 1e-15);
            assert!((ret[0] - (expected + 0.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_sequence() {
        let (adv, ret) = compute_gae(&[], &[], &[], 3.0, 0.99, 0.95);
        assert!(adv.is_empty() && ret.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_lambda_weighted_n_step_sum(
            steps in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64, proptest::bool::weighted(0.2)), 1..=10),
            last in -2.0..2.0f64,
            gamma in 0.0..=1.0f64,
            lambda in 0.0..=1.0f64,
        ) {
            let r: Vec<f64> = steps.iter().map(|s| s.0).collect();
            let v: Vec<f64> = steps.iter().map(|s| s.1).collect();
            let d: Vec<bool> = steps.iter().map(|s| s.2).collect();
            let (adv, ret) = compute_gae(&r, &v, &d, last, gamma, lambda);
            let oracle = brute(&r, &v, &d, last, gamma, lambda);
            for t in 0..r.len() {
                prop_assert!((adv[t] - oracle[t]).abs() < 1e-10, "t={t}: {} vs {}", adv[t], oracle[t]);
                prop_assert_eq!(ret[t], adv[t] + v[t]);
            }
        }
    }
}
