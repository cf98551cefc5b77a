/// Unnormalised Gaussian weights `exp(-k²/2σ²)` for `k = -r..=r`, `r = ⌈4σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let r = (4.0 * sigma).ceil() as i64;
    (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect()
}

/// Discrete Gaussian convolution. Near the ends the kernel is cut off and the remaining
/// weights are renormalised, so constants are preserved and the length is unchanged.
pub fn smooth_curve(values: &[f64], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in -r..=r {
                let j = i + k;
                if (0..n).contains(&j) {
                    let w = kernel[(k + r) as usize];
                    acc += w * values[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_is_unchanged() {
        let s = smooth_curve(&[2.5; 17], 1.7);
        assert!(s.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn impulse_gives_kernel_values() {
        let sigma = 1.5;
        let mut x = vec![0.0; 31];
        x[15] = 1.0;
        let s = smooth_curve(&x, sigma);
        let z: f64 = (-6i32..=6).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).sum();
        for (i, v) in s.iter().enumerate() {
            let k = i as i32 - 15;
            let expected = if k.abs() <= 6 { (-(k * k) as f64 / (2.0 * sigma * sigma)).exp() / z } else { 0.0 };
            assert!((v - expected).abs() < 1e-15, "{i}: {v} vs {expected}");
        }
    }

    #[test]
    fn tiny_sigma_is_identity() {
        let x: Vec<f64> = (0..20).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let s = smooth_curve(&x, 1e-3);
        assert!(x.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn empty_input() {
        assert!(smooth_curve(&[], 2.0).is_empty());
    }

    proptest! {
        #[test]
        fn padded_mean_is_preserved(
            body in proptest::collection::vec(-5.0..5.0f64, 1..30),
            pad_value in -3.0..3.0f64,
            sigma in 0.3..3.0f64,
        ) {
            let pad = 2 * (4.0 * sigma).ceil() as usize;
            let mut x = vec![pad_value; pad];
            x.extend(&body);
            x.extend(vec![pad_value; pad]);
            let s = smooth_curve(&x, sigma);
            prop_assert_eq!(s.len(), x.len());
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((mean(&s) - mean(&x)).abs() < 1e-9);
        }
    }
}
