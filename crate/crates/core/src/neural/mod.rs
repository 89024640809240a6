//! Hand-derived differentiable kernels.
//!
//! Each component exposes a forward pass that returns a cache and a backward
//! pass that accumulates into a gradient value of the same type as the
//! parameters. Gradients are checked against central differences in
//! [`gradcheck`].

mod adam;
mod attention;
pub mod checkpoint;
mod dense;
mod fusion;
pub mod gradcheck;
mod init;
mod loss;
mod lstm;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use attention::{attention_backward, attention_forward, AttentionOutput, AttentionParams};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use dense::Dense;
pub use fusion::{fusion_forward, FusionForward, FusionMode, FusionParams};
pub use init::Init;
pub use loss::{focal_loss, softmax, FocalLossConfig, FocalOutput, LOG_CLAMP};
pub use lstm::{lstm_backward, lstm_cell, lstm_forward, LstmCache, LstmParams};
pub use model::{
    Fusion, LossTerms, ModelConfig, Prediction, SampleInput, StreamModel,
    StreamSelection, TextureInput, TwoStreamModel,
};

pub type ParamVisitor<'a> = dyn FnMut(&str, &[usize], &[f64]) + 'a;
pub type ParamVisitorMut<'a> = dyn FnMut(&str, &mut [f64]) + 'a;

/// Named parameter tensors, visited in a fixed order.
///
/// The visiting order defines the flat layout used by the optimizer, the
/// gradient checker and checkpoints.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>);
    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>);

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, d| n += d.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, d| out.extend_from_slice(d));
        out
    }

    /// Overwrites all parameters from a flat vector.
    ///
    /// Panics if `flat` has the wrong length.
    fn set_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.visit_mut("", &mut |_, d| {
            d.copy_from_slice(&flat[pos..pos + d.len()]);
            pos += d.len();
        });
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
