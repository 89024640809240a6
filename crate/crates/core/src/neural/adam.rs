use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid ADAM settings {self:?}")))
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected ADAM update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "ADAM state has {} slots, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.5, -1.0, 3.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        for _ in 0..10 {
            st.step(&mut p, &[0.0; 3], &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // m̂ = g, v̂ = g², so Δ = -lr g / (|g| + ε)
        let cfg = AdamConfig::default();
        for g in [0.3, -2.5, 1e-6] {
            let mut p = vec![1.0];
            AdamState::new(1).step(&mut p, &[g], &cfg).unwrap();
            let expected = 1.0 - 0.001 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15, "g = {g}");
        }
    }

    #[test]
    fn constant_gradient_steps_are_bounded_by_lr() {
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(1);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..500 {
            let before = p[0];
            st.step(&mut p, &[4.0], &cfg).unwrap();
            last = before - p[0];
            assert!(last <= cfg.lr * (1.0 + 1e-9));
        }
        assert!((last - cfg.lr).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut st = AdamState::new(2);
        assert!(st.step(&mut [0.0], &[0.0], &AdamConfig::default()).is_err());
    }
}
