use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One fully connected layer: `activation(weight · x + bias)`, weight stored out×in.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::Dimension(format!(
                "layer weight must be a matrix, got shape {:?}",
                weight.shape()
            )));
        }
        if bias.shape() != [weight.shape()[0]] {
            return Err(Error::Dimension(format!(
                "bias shape {:?} does not match weight rows {}",
                bias.shape(),
                weight.shape()[0]
            )));
        }
        Ok(Layer { weight, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Stack of fully connected layers.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists every width from input to output;
    /// `output_gain` scales the final layer's weights.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let last = i + 1 == n_layers;
                let gain = if last { output_gain } else { 1.0 };
                let bound = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-1.0..=1.0) * bound)
                    .collect();
                Layer {
                    weight: Tensor::matrix(fan_out, fan_in, w).expect("sized above"),
                    bias: Tensor::zeros(vec![fan_out]),
                    activation: if last { output } else { hidden },
                }
            })
            .collect();
        Ok(MlpParams { layers })
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.shape().to_vec()),
                    bias: Tensor::zeros(l.bias.shape().to_vec()),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Applies the network to every row of `input` (last dim = features).
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let in_dim = self.in_dim();
        if input.last_dim() != in_dim {
            return Err(Error::Dimension(format!(
                "input last dim {} does not match MLP input width {}",
                input.last_dim(),
                in_dim
            )));
        }
        let rows = input.len() / in_dim;
        let out_dim = self.out_dim();
        let mut out = Vec::with_capacity(rows * out_dim);
        for row in input.data().chunks(in_dim) {
            let mut x = row.to_vec();
            for layer in &self.layers {
                x = layer_forward(layer, &x);
            }
            out.extend_from_slice(&x);
        }
        let mut shape = input.shape().to_vec();
        if shape.is_empty() {
            shape.push(out_dim);
        } else {
            *shape.last_mut().unwrap() = out_dim;
        }
        Tensor::new(shape, out)
    }
}

pub fn mlp_forward(params: &MlpParams, input: &Tensor) -> Result<Tensor> {
    params.forward(input)
}

pub(crate) fn layer_forward(layer: &Layer, x: &[f64]) -> Vec<f64> {
    let mut y = affine(layer.weight.data(), layer.bias.data(), x);
    for v in &mut y {
        *v = layer.activation.apply(*v);
    }
    y
}

/// `w · x + b` with `w` row-major, `b.len()` rows.
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .zip(w.chunks_exact(cols))
        .map(|(&bias, row)| bias + dot(row, x))
        .collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Flat views over every trainable scalar, in a fixed order.
pub trait ParamSet {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }
}

impl ParamSet for MlpParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.data()])
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.data_mut()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weight: Vec<f64>, rows: usize, cols: usize, bias: Vec<f64>) -> MlpParams {
        MlpParams::new(vec![Layer::new(
            Tensor::matrix(rows, cols, weight).unwrap(),
            Tensor::vector(bias),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, vec![0.0, 0.0]);
        let out = mlp_forward(&net, &Tensor::vector(vec![3.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);
    }

    #[test]
    fn zero_weight_layer_returns_bias() {
        let net = single(vec![0.0; 4], 2, 2, vec![1.0, 2.0]);
        for input in [[0.0, 0.0], [-7.5, 123.0]] {
            let out = net.forward(&Tensor::vector(input.to_vec())).unwrap();
            assert_eq!(out.data(), &[1.0, 2.0]);
        }
    }

    #[test]
    fn two_layer_matches_hand_evaluation() {
        // layer 1: tanh([[0.5, -0.25], [0.1, 0.2]] x + [0.1, -0.1])
        // layer 2: [[1.0, -2.0]] h + [0.3]
        let l1 = Layer::new(
            Tensor::matrix(2, 2, vec![0.5, -0.25, 0.1, 0.2]).unwrap(),
            Tensor::vector(vec![0.1, -0.1]),
            Activation::Tanh,
        )
        .unwrap();
        let l2 = Layer::new(
            Tensor::matrix(1, 2, vec![1.0, -2.0]).unwrap(),
            Tensor::vector(vec![0.3]),
            Activation::Identity,
        )
        .unwrap();
        let net = MlpParams::new(vec![l1, l2]).unwrap();
        let x = [2.0, 1.0];
        let h0 = (0.5 * x[0] - 0.25 * x[1] + 0.1f64).tanh();
        let h1 = (0.1 * x[0] + 0.2 * x[1] - 0.1f64).tanh();
        let expected = 1.0 * h0 - 2.0 * h1 + 0.3;
        let out = net.forward(&Tensor::vector(x.to_vec())).unwrap();
        assert!((out.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn batched_rows_are_independent() {
        let net = single(vec![1.0, 2.0, 3.0, 4.0], 2, 2, vec![0.5, -0.5]);
        let batch = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = net.forward(&batch).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        assert_eq!(out.data(), &[1.5, 2.5, 2.5, 3.5]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, vec![0.0, 0.0]);
        let err = net.forward(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn layers_must_chain() {
        let a = Layer::new(Tensor::zeros(vec![3, 2]), Tensor::zeros(vec![3]), Activation::Tanh).unwrap();
        let b = Layer::new(Tensor::zeros(vec![1, 4]), Tensor::zeros(vec![1]), Activation::Tanh).unwrap();
        assert!(matches!(MlpParams::new(vec![a, b]), Err(Error::Dimension(_))));
    }

    #[test]
    fn param_count_depends_only_on_sizes() {
        use rand::SeedableRng;
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = MlpParams::init(&[6, 16, 4], Activation::Tanh, Activation::Identity, 1.0, &mut r1).unwrap();
        let b = MlpParams::init(&[6, 16, 4], Activation::Tanh, Activation::Identity, 1.0, &mut r2).unwrap();
        assert_eq!(a.num_params(), 6 * 16 + 16 + 16 * 4 + 4);
        assert_eq!(a.num_params(), b.param_count());
    }
}
