use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to the true-class probability before the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FocalLossConfig {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalLossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
        }
    }
}

impl FocalLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("focal gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("focal alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalOutput {
    pub loss: f64,
    /// Gradient with respect to the logits that produced `p` through softmax.
    pub grad_logits: Vec<f64>,
    /// Set when the true-class probability was below [`LOG_CLAMP`].
    pub clamped: bool,
}

/// Multi-class focal loss `-α (1 - p_t)^γ ln p_t` for softmax probabilities `p`.
pub fn focal_loss(p: &[f64], label: usize, cfg: &FocalLossConfig) -> Result<FocalOutput> {
    if label >= p.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            p.len()
        )));
    }
    let pt = p[label];
    let clamped = pt < LOG_CLAMP;
    let log_pt = pt.max(LOG_CLAMP).ln();
    let one_minus = (1.0 - pt).max(0.0);
    let modulating = if cfg.gamma == 0.0 { 1.0 } else { one_minus.powf(cfg.gamma) };
    let loss = cfg.alpha * modulating * (0.0 - log_pt);

    // dL/dp_t · p_t; the softmax Jacobian then gives dL/dz_k = g (δ_tk - p_k).
    let focus = if cfg.gamma == 0.0 || one_minus == 0.0 {
        0.0
    } else {
        cfg.gamma * one_minus.powf(cfg.gamma - 1.0) * pt * log_pt
    };
    let g = cfg.alpha * (focus - modulating);
    let grad_logits = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| {
            let delta = if k == label { 1.0 } else { 0.0 };
            g * (delta - pk)
        })
        .collect();
    Ok(FocalOutput {
        loss,
        grad_logits,
        clamped,
    })
}
