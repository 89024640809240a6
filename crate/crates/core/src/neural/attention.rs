//! Soft attention over hidden states.
//!
//! `u_i = Σ_k tanh(W h_i + b)_k`, `α = softmax(u)`, `H = Σ_i α_i h_i`. The
//! vector-valued `tanh(W h_i + b)` is reduced to a scalar score by summing its
//! components.

use ndarray::{Array1, Array2, Axis};

use super::{loss::softmax, Init, Parameters, ParamVisitor, ParamVisitorMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `h x h`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl AttentionParams {
    pub fn new(hidden: usize, init: &mut Init) -> Self {
        Self {
            w: init.matrix(hidden, hidden, hidden),
            b: Array1::zeros(hidden),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            w: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.b.len())
    }
}

impl Parameters for AttentionParams {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        f(&format!("{prefix}.w"), self.w.shape(), self.w.as_slice().unwrap());
        f(&format!("{prefix}.b"), self.b.shape(), self.b.as_slice().unwrap());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        f(&format!("{prefix}.w"), self.w.as_slice_mut().unwrap());
        f(&format!("{prefix}.b"), self.b.as_slice_mut().unwrap());
    }
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// Attentive summary `H`.
    pub context: Array1<f64>,
    /// Attention weights `α`, one per step.
    pub weights: Array1<f64>,
    /// `tanh(W h_i + b)` per step, `T x h`.
    activations: Array2<f64>,
}

pub fn attention_forward(hidden: &Array2<f64>, params: &AttentionParams) -> Result<AttentionOutput> {
    if hidden.nrows() == 0 {
        return Err(Error::invalid("attention over an empty sequence"));
    }
    if hidden.ncols() != params.b.len() {
        return Err(Error::invalid(format!(
            "attention expects width {}, got {}",
            params.b.len(),
            hidden.ncols()
        )));
    }
    let activations = (hidden.dot(&params.w.t()) + &params.b).mapv_into(f64::tanh);
    let scores = activations.sum_axis(Axis(1));
    let weights = Array1::from(softmax(scores.as_slice().unwrap()));
    let context = weights.dot(hidden);
    Ok(AttentionOutput {
        context,
        weights,
        activations,
    })
}

/// Returns the gradient with respect to `hidden`; parameter gradients
/// accumulate into `grads`.
pub fn attention_backward(
    params: &AttentionParams,
    hidden: &Array2<f64>,
    out: &AttentionOutput,
    d_context: &Array1<f64>,
    grads: &mut AttentionParams,
) -> Array2<f64> {
    let alpha = &out.weights;
    let d_alpha = hidden.dot(d_context);
    let mean = alpha.dot(&d_alpha);
    let d_score = alpha * &(d_alpha - mean);
    // dZ[i, k] = dscore_i * (1 - a_ik²)
    let mut d_pre = out.activations.mapv(|a| 1.0 - a * a);
    for (mut row, &ds) in d_pre.rows_mut().into_iter().zip(d_score.iter()) {
        row *= ds;
    }
    grads.w += &d_pre.t().dot(hidden);
    grads.b += &d_pre.sum_axis(Axis(0));

    let mut d_hidden = d_pre.dot(&params.w);
    for (mut row, &a) in d_hidden.rows_mut().into_iter().zip(alpha.iter()) {
        row.scaled_add(a, d_context);
    }
    d_hidden
}
