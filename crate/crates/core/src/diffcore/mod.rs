//! Dense tensors, a reverse-mode tape, Adam and seeded random streams.

mod adam;
mod gradcheck;
mod param;
mod rng;
mod sparse;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::{gradcheck, GradcheckReport, ParamGradError, REL_ERR_FLOOR};
pub use param::{glorot_uniform, ParamId, ParamStore, Parameter};
pub use rng::{Purpose, RngStream};
pub use sparse::CsrMatrix;
pub use tape::{ActivationOp, InputGrads, Tape, Var};
pub use tensor::{Precision, Tensor};

#[cfg(test)]
mod tests;
