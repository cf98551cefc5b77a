//! Scalar kernels shared by eager code and the gradient tape.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Softmax over `logits`; entries with `mask[i] == true` are excluded and get exactly 0.
/// An empty mask means nothing is masked.
pub fn softmax(logits: &Tensor, mask: &[bool]) -> Result<Tensor> {
    softmax_slice(logits.data(), mask).map(Tensor::vector)
}

pub(crate) fn softmax_slice(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if !mask.is_empty() && mask.len() != logits.len() {
        return Err(Error::Dimension(format!(
            "mask length {} does not match {} logits",
            mask.len(),
            logits.len()
        )));
    }
    let live = |i: usize| mask.is_empty() || !mask[i];
    let max = (0..logits.len())
        .filter(|&i| live(i))
        .map(|i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    let mut out: Vec<f64> = (0..logits.len())
        .map(|i| if live(i) { (logits[i] - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

pub(crate) fn log_softmax_slice(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let p = softmax(&Tensor::vector(vec![0.0; 3]), &[]).unwrap();
        for v in p.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_logits_match_scalar_evaluation() {
        let p = softmax(&Tensor::vector(vec![1.0, 0.0]), &[]).unwrap();
        let e = std::f64::consts::E;
        assert!((p.data()[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.data()[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((p.data()[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn masked_entry_is_exactly_zero() {
        let p = softmax(&Tensor::vector(vec![5.0; 3]), &[false, true, false]).unwrap();
        assert_eq!(p.data(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn fully_masked_is_empty_support() {
        let err = softmax(&Tensor::vector(vec![1.0, 2.0]), &[true, true]).unwrap_err();
        assert!(matches!(err, Error::EmptySupport));
        assert!(matches!(softmax(&Tensor::vector(vec![]), &[]), Err(Error::EmptySupport)));
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let p = softmax(&Tensor::vector(vec![1000.0, 999.0]), &[]).unwrap();
        assert!(p.is_finite());
        assert!((p.data()[0] + p.data()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((sigmoid(2.0) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in prop::collection::vec(-50.0f64..50.0, 1..12),
            shift in -1e3f64..1e3,
        ) {
            let p = softmax_slice(&logits, &[]).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
            let q = softmax_slice(&shifted, &[]).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
