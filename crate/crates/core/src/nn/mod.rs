//! Dense tensor kernel with hand-written forward and backward passes for the
//! fixed set of layers the language model and the classifier use.
//!
//! All layers are generic over [`Scalar`] so the same code runs in 32-bit for
//! training and in 64-bit for finite-difference gradient checks.

mod adam;
mod conv;
mod dense;
mod embedding;
mod loss;
mod lstm;
mod param;
mod pool;
mod tensor;

pub use adam::{Adam, AdamState};
pub use conv::{Conv1d, ConvCache, Padding};
pub use dense::{dense_backward, dense_forward};
pub use embedding::{embedding_backward, embedding_forward};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use lstm::{
    bilstm_backward, bilstm_forward, final_state, final_state_backward, BiLstmCache, Lstm, LstmCache, LstmGrads,
    LstmParams,
};
pub use param::{Param, ParamSet};
#[allow(unused_imports)]
pub(crate) use param::{glorot, uniform};
pub use pool::{
    global_max_pool_backward, global_max_pool_forward, max_pool_backward, max_pool_forward, LocalPoolCache, MaxPoolCache,
};
pub use tensor::{gemm, relu_backward, relu_inplace, Scalar, Tensor};
