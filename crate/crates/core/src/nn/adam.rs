use serde::{Deserialize, Serialize};

use super::mlp::ParamSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, flattened in [`ParamSet`] order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One bias-corrected Adam update. Refuses the whole step if any gradient is non-finite.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState, hyper: &AdamConfig) -> Result<()> {
    let g = grads.flat();
    if let Some(index) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::PoisonedUpdate { index });
    }
    let n = params.param_count();
    if g.len() != n {
        return Err(Error::Dimension(format!("{} gradients for {} parameters", g.len(), n)));
    }
    if state.m.is_empty() {
        state.m = vec![0.0; n];
        state.v = vec![0.0; n];
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - hyper.beta1.powf(t);
    let c2 = 1.0 - hyper.beta2.powf(t);
    let mut k = 0;
    for slice in params.param_slices_mut() {
        for p in slice.iter_mut() {
            let m = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * g[k];
            let v = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
            state.m[k] = m;
            state.v[k] = v;
            *p -= hyper.learning_rate * (m / c1) / ((v / c2).sqrt() + hyper.epsilon);
            k += 1;
        }
    }
    Ok(())
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads
        .param_slices()
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for s in grads.param_slices_mut() {
            for v in s {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer, MlpParams, Tensor};

    fn scalar(w: f64) -> MlpParams {
        MlpParams::new(vec![Layer::new(
            Tensor::matrix(1, 1, vec![w]).unwrap(),
            Tensor::vector(vec![0.0]),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn weight(p: &MlpParams) -> f64 {
        p.layers()[0].weight.data()[0]
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = scalar(1.25);
        let g = p.zeros_like();
        let mut state = AdamState::default();
        adam_step(&mut p, &g, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(weight(&p), 1.25);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn descends_on_quadratic() {
        let mut p = scalar(1.0);
        let mut g = p.zeros_like();
        g.layers_mut()[0].weight.data_mut()[0] = 2.0 * weight(&p);
        let mut state = AdamState::default();
        adam_step(&mut p, &g, &mut state, &AdamConfig::default()).unwrap();
        assert!(weight(&p) < 1.0);
    }

    #[test]
    fn matches_scalar_recurrence_for_three_steps() {
        // Independent scalar Adam on f(w) = (w - 0.5)^2 with a larger step size.
        let hyper = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
        let (mut w, mut m, mut v) = (2.0f64, 0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=3 {
            let g = 2.0 * (w - 0.5);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 0.1 * mh / (vh.sqrt() + 1e-8);
            expected.push(w);
        }

        let mut p = scalar(2.0);
        let mut state = AdamState::default();
        for want in expected {
            let mut g = p.zeros_like();
            g.layers_mut()[0].weight.data_mut()[0] = 2.0 * (weight(&p) - 0.5);
            adam_step(&mut p, &g, &mut state, &hyper).unwrap();
            assert!((weight(&p) - want).abs() < 1e-14, "{} vs {}", weight(&p), want);
        }
    }

    #[test]
    fn non_finite_gradient_is_refused() {
        let mut p = scalar(1.0);
        let mut g = p.zeros_like();
        g.layers_mut()[0].weight.data_mut()[0] = f64::NAN;
        let mut state = AdamState::default();
        let err = adam_step(&mut p, &g, &mut state, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::PoisonedUpdate { index: 0 }));
        assert_eq!(weight(&p), 1.0);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = scalar(0.0);
        g.layers_mut()[0].weight.data_mut()[0] = 3.0;
        g.layers_mut()[0].bias.data_mut()[0] = 4.0;
        let before = clip_grad_norm(&mut g, 1.0);
        assert_eq!(before, 5.0);
        let after: f64 = g.flat().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
    }
}
