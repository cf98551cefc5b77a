//! Dense tensors, fully connected networks, a gradient tape and Adam.

mod adam;
mod mlp;
mod ops;
mod serialize;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState};
pub use mlp::{mlp_forward, Activation, Layer, MlpParams, ParamSet};
pub use ops::{log_sigmoid, sigmoid, softmax};
pub(crate) use ops::log_softmax_slice;
pub use serialize::{read_mlp, write_mlp};
pub(crate) use serialize::{read_u32, take};
pub use tape::{BlockId, Gradients, NodeId, Tape};
pub use tensor::Tensor;
