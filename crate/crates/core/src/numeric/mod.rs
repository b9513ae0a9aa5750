//! Dense arrays, a feed-forward network with hand-written reverse mode, a
//! central-difference gradient oracle and Adam.

mod adam;
mod array;
pub mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use array::DenseArray;
pub use gradcheck::finite_diff_grad;
pub use mlp::{
    init_params, mlp_backward, mlp_backward_accumulate, mlp_backward_batch, mlp_forward, mlp_forward_batch, BatchCache,
    ForwardCache, MlpParams,
};

/// Debug-build guard on exported results.
#[inline]
pub(crate) fn debug_check_finite(values: &[f64], what: &str) {
    debug_assert!(
        values.iter().all(|v| v.is_finite()),
        "non-finite value produced by {what}"
    );
}
