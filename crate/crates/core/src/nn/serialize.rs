//! Little-endian binary encoding of [`MlpParams`] with per-layer shape headers.

use super::mlp::{Activation, Layer, MlpParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn write_mlp(out: &mut Vec<u8>, params: &MlpParams) {
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for layer in params.layers() {
        out.push(layer.activation.code());
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        for v in layer.weight.data().iter().chain(layer.bias.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Reads one MLP from the front of `input`, advancing it.
pub fn read_mlp(input: &mut &[u8]) -> Result<MlpParams> {
    let n_layers = read_u32(input)? as usize;
    if n_layers == 0 {
        return Err(Error::format("parameter block", "zero layers"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let code = take(input, 1)?[0];
        let activation = Activation::from_code(code)
            .ok_or_else(|| Error::format("parameter block", format!("unknown activation code {code}")))?;
        let out_dim = read_u32(input)? as usize;
        let in_dim = read_u32(input)? as usize;
        let weight = read_f64s(input, out_dim * in_dim)?;
        let bias = read_f64s(input, out_dim)?;
        layers.push(Layer::new(Tensor::matrix(out_dim, in_dim, weight)?, Tensor::vector(bias), activation)?);
    }
    MlpParams::new(layers)
}

pub(crate) fn read_u32(input: &mut &[u8]) -> Result<u32> {
    let b = take(input, 4)?;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

fn read_f64s(input: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    let bytes = take(input, n.checked_mul(8).ok_or_else(|| Error::format("parameter block", "size overflow"))?)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub(crate) fn take<'a>(input: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if input.len() < n {
        return Err(Error::format("parameter block", "unexpected end of data"));
    }
    let (head, tail) = input.split_at(n);
    *input = tail;
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamSet;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..6) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let net = MlpParams::init(&[a, b, c], Activation::Tanh, Activation::Identity, 0.5, &mut rng).unwrap();
            let mut buf = Vec::new();
            write_mlp(&mut buf, &net);
            let mut slice = buf.as_slice();
            let back = read_mlp(&mut slice).unwrap();
            prop_assert!(slice.is_empty());
            let bits = |p: &MlpParams| p.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&net), bits(&back));
            prop_assert_eq!(net, back);
        }
    }

    #[test]
    fn truncated_input_is_rejected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let net = MlpParams::init(&[2, 3], Activation::Tanh, Activation::Tanh, 1.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &net);
        buf.pop();
        assert!(matches!(read_mlp(&mut buf.as_slice()), Err(Error::Format { .. })));
    }
}
