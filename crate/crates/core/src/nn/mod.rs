//! Dense tensors, a tape-based reverse-mode autodiff engine, multilayer
//! perceptrons and the Adam optimizer.

mod activation;
mod adam;
mod gradcheck;
mod linalg;
mod mlp;
mod params;
mod tape;
mod tensor;

pub use activation::{sigmoid, Activation};
pub use adam::{adam_step, AdamConfig, AdamState, Moments};
pub use gradcheck::{finite_diff_check, finite_diff_check_with};
pub use mlp::{mlp_forward, MlpSpec, Trace, WeightInit};
pub use params::{ParamStore, ParamStoreDoc};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::log_softmax_into;
