//! Gated two-stream fusion.
//!
//! Each stream summary passes through its own `tanh` dense encoder, giving `T*`
//! (texture) and `S*` (structure). A two-way gate
//! `η = softmax(tanh(W_f [T*, S*] + b_f))` scales each stream, and the head
//! classifies `[η₁ T*, η₂ S*]`.

use ndarray::{concatenate, s, Array1, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{loss::softmax, Dense, Init, Parameters, ParamVisitor, ParamVisitorMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    /// Stream encoders plus the learned η gate.
    #[default]
    Gated,
    /// Plain concatenation of the stream summaries into the head.
    Concat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub enc_texture: Dense,
    pub enc_structure: Dense,
    /// `2 x 2d_f`
    pub gate: Dense,
    /// `C x 2d_f`
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct FusionForward {
    pub t_star: Array1<f64>,
    pub s_star: Array1<f64>,
    /// `tanh(W_f [T*, S*] + b_f)`
    pub gate_act: Array1<f64>,
    pub eta: Array1<f64>,
    pub fused: Array1<f64>,
    pub probs: Vec<f64>,
}

impl FusionParams {
    pub fn new(hidden: usize, fusion_dim: usize, classes: usize, init: &mut Init) -> Self {
        Self {
            enc_texture: Dense::new(hidden, fusion_dim, init),
            enc_structure: Dense::new(hidden, fusion_dim, init),
            gate: Dense::new(2 * fusion_dim, 2, init),
            head: Dense::new(2 * fusion_dim, classes, init),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc_texture: self.enc_texture.zeros_like(),
            enc_structure: self.enc_structure.zeros_like(),
            gate: self.gate.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn fusion_dim(&self) -> usize {
        self.enc_texture.output_dim()
    }

    /// Full block: stream encoders, gate and head.
    pub fn forward(&self, h_texture: ArrayView1<f64>, h_structure: ArrayView1<f64>) -> Result<FusionForward> {
        if h_texture.len() != self.enc_texture.input_dim() || h_structure.len() != self.enc_structure.input_dim() {
            return Err(Error::invalid("fusion input width mismatch"));
        }
        let t_star = self.enc_texture.forward(h_texture).mapv_into(f64::tanh);
        let s_star = self.enc_structure.forward(h_structure).mapv_into(f64::tanh);
        fusion_forward(t_star, s_star, self)
    }

    /// Backward through the full block. Returns `(dH_texture, dH_structure)`.
    pub fn backward(
        &self,
        h_texture: ArrayView1<f64>,
        h_structure: ArrayView1<f64>,
        fwd: &FusionForward,
        d_logits: ArrayView1<f64>,
        grads: &mut FusionParams,
    ) -> (Array1<f64>, Array1<f64>) {
        let (d_t, d_s) = self.backward_gate(fwd, d_logits, grads);
        let d_t_pre = d_t * &fwd.t_star.mapv(|a| 1.0 - a * a);
        let d_s_pre = d_s * &fwd.s_star.mapv(|a| 1.0 - a * a);
        let dh_t = self.enc_texture.backward(h_texture, d_t_pre.view(), &mut grads.enc_texture);
        let dh_s = self.enc_structure.backward(h_structure, d_s_pre.view(), &mut grads.enc_structure);
        (dh_t, dh_s)
    }

    /// Backward through gate and head only. Returns `(dT*, dS*)`.
    pub fn backward_gate(
        &self,
        fwd: &FusionForward,
        d_logits: ArrayView1<f64>,
        grads: &mut FusionParams,
    ) -> (Array1<f64>, Array1<f64>) {
        let d = self.fusion_dim();
        let d_fused = self.head.backward(fwd.fused.view(), d_logits, &mut grads.head);
        let d_fused_t = d_fused.slice(s![..d]);
        let d_fused_s = d_fused.slice(s![d..]);

        let mut d_t = &d_fused_t * fwd.eta[0];
        let mut d_s = &d_fused_s * fwd.eta[1];
        let d_eta = [d_fused_t.dot(&fwd.t_star), d_fused_s.dot(&fwd.s_star)];
        let mean = fwd.eta[0] * d_eta[0] + fwd.eta[1] * d_eta[1];
        let d_gate_pre: Array1<f64> = (0..2)
            .map(|k| fwd.eta[k] * (d_eta[k] - mean) * (1.0 - fwd.gate_act[k] * fwd.gate_act[k]))
            .collect();
        let gate_in = concatenate(Axis(0), &[fwd.t_star.view(), fwd.s_star.view()]).unwrap();
        let d_gate_in = self.gate.backward(gate_in.view(), d_gate_pre.view(), &mut grads.gate);
        d_t += &d_gate_in.slice(s![..d]);
        d_s += &d_gate_in.slice(s![d..]);
        (d_t, d_s)
    }
}

/// Gate and head applied to already-encoded stream features.
pub fn fusion_forward(t_star: Array1<f64>, s_star: Array1<f64>, params: &FusionParams) -> Result<FusionForward> {
    let d = params.fusion_dim();
    if t_star.len() != d || s_star.len() != d {
        return Err(Error::invalid(format!(
            "fusion expects stream features of width {d}, got {} and {}",
            t_star.len(),
            s_star.len()
        )));
    }
    let gate_in = concatenate(Axis(0), &[t_star.view(), s_star.view()]).unwrap();
    let gate_act = params.gate.forward(gate_in.view()).mapv_into(f64::tanh);
    let eta = Array1::from(softmax(gate_act.as_slice().unwrap()));
    let fused = concatenate(Axis(0), &[(&t_star * eta[0]).view(), (&s_star * eta[1]).view()]).unwrap();
    let probs = softmax(params.head.forward(fused.view()).as_slice().unwrap());
    Ok(FusionForward {
        t_star,
        s_star,
        gate_act,
        eta,
        fused,
        probs,
    })
}

impl Parameters for FusionParams {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        self.enc_texture.visit(&format!("{prefix}.enc_texture"), f);
        self.enc_structure.visit(&format!("{prefix}.enc_structure"), f);
        self.gate.visit(&format!("{prefix}.gate"), f);
        self.head.visit(&format!("{prefix}.head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        self.enc_texture.visit_mut(&format!("{prefix}.enc_texture"), f);
        self.enc_structure.visit_mut(&format!("{prefix}.enc_structure"), f);
        self.gate.visit_mut(&format!("{prefix}.gate"), f);
        self.head.visit_mut(&format!("{prefix}.head"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gate_weights_split_evenly() {
        let mut params = FusionParams::new(4, 3, 5, &mut Init::new(1));
        params.gate = Dense::zeros(6, 2);
        let out = params
            .forward(ndarray::array![0.1, 0.2, 0.3, 0.4].view(), ndarray::array![-0.1, 0.0, 0.5, 0.2].view())
            .unwrap();
        assert_eq!(out.eta.as_slice().unwrap(), &[0.5, 0.5]);
        assert_eq!(out.probs.len(), 5);
        assert!((out.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_rejected() {
        let params = FusionParams::new(4, 3, 2, &mut Init::new(1));
        assert!(fusion_forward(Array1::zeros(2), Array1::zeros(3), &params).is_err());
    }
}
