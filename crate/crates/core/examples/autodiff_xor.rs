//! Fits a two-layer network to XOR with the tape autodiff and Adam, then compares one
//! analytic gradient coordinate against a central finite difference.
//!
//! ```text
//! cargo run --release --example autodiff_xor
//! ```

use fortattack::nn::{adam_step, Activation, AdamConfig, AdamState, MlpParams, ParamSet, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DATA: [([f64; 2], f64); 4] = [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)];

fn loss_and_grad(net: &MlpParams) -> (f64, MlpParams) {
    let mut tape = Tape::new();
    let block = tape.register(net);
    let mut terms = Vec::new();
    for (x, y) in DATA {
        let input = tape.constant(x.to_vec());
        let out = tape.mlp(block, input).unwrap();
        let p = tape.sigmoid(out);
        let err = tape.add_const(p, -y);
        terms.push(tape.square(err));
    }
    let all = tape.concat(&terms);
    let total = tape.sum(all);
    let loss = tape.scale(total, 0.25);
    let value = tape.scalar(loss);
    let mut grads = tape.backward(loss).unwrap();
    (value, grads.blocks.remove(0))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = MlpParams::init(&[2, 8, 1], Activation::Tanh, Activation::Identity, 1.0, &mut rng).unwrap();
    let mut adam = AdamState::default();
    let hyper = AdamConfig { learning_rate: 0.05, ..AdamConfig::default() };

    for epoch in 0..=400 {
        let (loss, grads) = loss_and_grad(&net);
        if epoch % 100 == 0 {
            println!("epoch {epoch:3}  loss {loss:.6}");
        }
        adam_step(&mut net, &grads, &mut adam, &hyper).unwrap();
    }

    for (x, y) in DATA {
        let z = net.forward(&fortattack::nn::Tensor::vector(x.to_vec())).unwrap().data()[0];
        println!("{x:?} -> {:.3} (target {y})", fortattack::nn::sigmoid(z));
    }

    let (_, grads) = loss_and_grad(&net);
    let analytic = grads.flat()[5];
    let h = 1e-6;
    let shifted = |delta: f64| {
        let mut n = net.clone();
        n.param_slices_mut()[0][5] += delta;
        loss_and_grad(&n).0
    };
    let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
    println!("d loss / d w[5]: analytic {analytic:.9}, finite difference {numeric:.9}");
}
