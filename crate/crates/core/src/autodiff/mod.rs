//! Minimal dense-tensor math with reverse-mode differentiation, covering
//! exactly the primitives the three classifier architectures need.

mod gradcheck;
mod params;
mod tape;
mod tensor;


pub use gradcheck::grad_check;
pub use params::ParamSet;
pub use tape::{PadMode, Tape, VarId};
pub use tensor::Tensor;
