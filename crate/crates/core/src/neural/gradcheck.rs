//! Central-difference verification of the hand-derived gradients.

use ndarray::{Array1, Array2};
use serde::Serialize;

use super::{
    attention_backward, attention_forward, focal_loss, lstm_backward, lstm_forward, softmax, AttentionParams,
    Dense, FocalLossConfig, FusionMode, FusionParams, Init, LstmParams, ModelConfig, Parameters, SampleInput,
    StreamSelection, TextureInput, TwoStreamModel,
};
use crate::embedding::{Patch, TinyConv};

/// Relative errors at or above this fail a check.
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

/// Denominator floor for the relative error, so that coordinates whose true
/// gradient is zero are judged by absolute error.
pub const RELATIVE_FLOOR: f64 = 1e-7;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `(f(θ + eps·e_k) - f(θ - eps·e_k)) / (2 eps)` for every coordinate `k`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], eps: f64) -> Vec<f64> {
    central_difference_at(f, theta, eps, &(0..theta.len()).collect::<Vec<_>>())
}

pub fn central_difference_at(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], eps: f64, coords: &[usize]) -> Vec<f64> {
    let mut work = theta.to_vec();
    coords
        .iter()
        .map(|&k| {
            let orig = work[k];
            work[k] = orig + eps;
            let plus = f(&work);
            work[k] = orig - eps;
            let minus = f(&work);
            work[k] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub component: String,
    pub eps: f64,
    pub checked: usize,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADCHECK_THRESHOLD
    }
}

/// Compares `analytic` against central differences of `f` at `theta`.
pub fn gradient_check(
    component: &str,
    f: &dyn Fn(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    eps: f64,
) -> GradCheckReport {
    let numeric = central_difference(f, theta, eps);
    GradCheckReport {
        component: component.to_string(),
        eps,
        checked: theta.len(),
        max_relative_error: max_relative_error(analytic, &numeric),
    }
}

/// Options for [`run_all`].
#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub seed: u64,
    pub eps: f64,
    /// Test hook: scale the analytic gradient of the named component by 1.01.
    pub corrupt: Option<String>,
}

pub const COMPONENTS: [&str; 6] = ["lstm", "attention", "focal-head", "fusion", "tiny-conv", "model"];

/// Runs every component check.
pub fn run_all(opts: &CheckOptions) -> Vec<GradCheckReport> {
    COMPONENTS
        .iter()
        .map(|&name| {
            let (theta, mut analytic, f) = problem(name, opts.seed);
            if opts.corrupt.as_deref() == Some(name) {
                analytic.iter_mut().for_each(|g| *g *= 1.01);
            }
            gradient_check(name, &*f, &theta, &analytic, opts.eps)
        })
        .collect()
}

type Problem = (Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> f64>);

fn problem(name: &str, seed: u64) -> Problem {
    match name {
        "lstm" => lstm_problem(seed),
        "attention" => attention_problem(seed),
        "focal-head" => focal_head_problem(seed),
        "fusion" => fusion_problem(seed),
        "tiny-conv" => tiny_conv_problem(seed),
        "model" => model_problem(seed),
        other => panic!("unknown component {other}"),
    }
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    Init::new(seed).matrix(rows, cols, 1)
}

/// LSTM parameters and inputs against a fixed random projection of the hidden states.
fn lstm_problem(seed: u64) -> Problem {
    let (steps, d_in, hidden) = (5, 3, 4);
    let params = LstmParams::new(d_in, hidden, &mut Init::new(seed));
    let inputs = matrix(steps, d_in, seed + 1);
    let proj = matrix(steps, hidden, seed + 2);

    let (_, cache) = lstm_forward(&params, &inputs).unwrap();
    let mut grads = params.zeros_like();
    let dx = lstm_backward(&params, &cache, &proj, &mut grads);

    let n_params = params.num_params();
    let mut theta = params.to_flat();
    theta.extend(inputs.iter());
    let mut analytic = grads.to_flat();
    analytic.extend(dx.iter());

    let f = move |t: &[f64]| {
        let mut p = params.clone();
        p.set_flat(&t[..n_params]);
        let x = Array2::from_shape_vec((steps, d_in), t[n_params..].to_vec()).unwrap();
        let (h, _) = lstm_forward(&p, &x).unwrap();
        (&h * &proj).sum()
    };
    (theta, analytic, Box::new(f))
}

fn attention_problem(seed: u64) -> Problem {
    let (steps, hidden) = (6, 4);
    let params = AttentionParams::new(hidden, &mut Init::new(seed));
    let states = matrix(steps, hidden, seed + 1);
    let proj = Array1::from(matrix(1, hidden, seed + 2).into_raw_vec_and_offset().0);

    let out = attention_forward(&states, &params).unwrap();
    let mut grads = params.zeros_like();
    let dh = attention_backward(&params, &states, &out, &proj, &mut grads);

    let n_params = params.num_params();
    let mut theta = params.to_flat();
    theta.extend(states.iter());
    let mut analytic = grads.to_flat();
    analytic.extend(dh.iter());

    let f = move |t: &[f64]| {
        let mut p = params.clone();
        p.set_flat(&t[..n_params]);
        let h = Array2::from_shape_vec((steps, hidden), t[n_params..].to_vec()).unwrap();
        attention_forward(&h, &p).unwrap().context.dot(&proj)
    };
    (theta, analytic, Box::new(f))
}

/// Dense layer + softmax + focal loss, with respect to weights and input.
fn focal_head_problem(seed: u64) -> Problem {
    let (d_in, classes, label) = (4, 3, 1);
    let cfg = FocalLossConfig::default();
    let head = Dense::new(d_in, classes, &mut Init::new(seed));
    let x = Array1::from(matrix(1, d_in, seed + 1).into_raw_vec_and_offset().0);

    let probs = softmax(head.forward(x.view()).as_slice().unwrap());
    let out = focal_loss(&probs, label, &cfg).unwrap();
    let mut grads = head.zeros_like();
    let dx = head.backward(x.view(), Array1::from(out.grad_logits).view(), &mut grads);

    let n_params = head.num_params();
    let mut theta = head.to_flat();
    theta.extend(x.iter());
    let mut analytic = grads.to_flat();
    analytic.extend(dx.iter());

    let f = move |t: &[f64]| {
        let mut h = head.clone();
        h.set_flat(&t[..n_params]);
        let x = Array1::from(t[n_params..].to_vec());
        let p = softmax(h.forward(x.view()).as_slice().unwrap());
        focal_loss(&p, label, &cfg).unwrap().loss
    };
    (theta, analytic, Box::new(f))
}

/// Encoders, gate (W_f, b_f) and head, plus both stream summaries.
fn fusion_problem(seed: u64) -> Problem {
    let (hidden, fdim, classes, label) = (4, 3, 3, 2);
    let cfg = FocalLossConfig::default();
    let params = FusionParams::new(hidden, fdim, classes, &mut Init::new(seed));
    let ht = Array1::from(matrix(1, hidden, seed + 1).into_raw_vec_and_offset().0);
    let hs = Array1::from(matrix(1, hidden, seed + 2).into_raw_vec_and_offset().0);

    let fwd = params.forward(ht.view(), hs.view()).unwrap();
    let out = focal_loss(&fwd.probs, label, &cfg).unwrap();
    let mut grads = params.zeros_like();
    let (dt, ds) = params.backward(ht.view(), hs.view(), &fwd, Array1::from(out.grad_logits).view(), &mut grads);

    let n_params = params.num_params();
    let mut theta = params.to_flat();
    theta.extend(ht.iter().chain(hs.iter()));
    let mut analytic = grads.to_flat();
    analytic.extend(dt.iter().chain(ds.iter()));

    let f = move |t: &[f64]| {
        let mut p = params.clone();
        p.set_flat(&t[..n_params]);
        let ht = Array1::from(t[n_params..n_params + hidden].to_vec());
        let hs = Array1::from(t[n_params + hidden..].to_vec());
        let fwd = p.forward(ht.view(), hs.view()).unwrap();
        focal_loss(&fwd.probs, label, &cfg).unwrap().loss
    };
    (theta, analytic, Box::new(f))
}

fn toy_patch(size: usize, seed: u64) -> Patch {
    let m = matrix(size, size, seed).mapv(|v| 0.5 + 0.5 * v);
    Patch::new(size, m.into_raw_vec_and_offset().0).unwrap()
}

fn tiny_conv_problem(seed: u64) -> Problem {
    let conv = TinyConv::new(5, 3, seed);
    let patch = toy_patch(5, seed + 1);
    let dout = [0.7, -0.4, 1.3];
    let (_, cache) = conv.forward(&patch);
    let mut grads = conv.zeros_like();
    conv.backward(&patch, &cache, &dout, &mut grads);
    let theta = conv.to_flat();
    let analytic = grads.to_flat();
    let f = move |t: &[f64]| {
        let mut c = conv.clone();
        c.set_flat(t);
        c.forward(&patch).0.iter().zip(&dout).map(|(o, d)| o * d).sum()
    };
    (theta, analytic, Box::new(f))
}

/// Toy problem for the composed model: 2 classes, 4 landmarks (7 tokens),
/// gated fusion, trainable patch encoder, three labeled samples.
pub fn toy_model(seed: u64) -> (TwoStreamModel, Vec<(SampleInput, usize)>) {
    let tokens = vec![0, 1, 0, 2, 3, 2, 0];
    let config = ModelConfig {
        classes: 2,
        hidden: 3,
        fusion_dim: 3,
        structure_dim: 2,
        texture_dim: 2,
        streams: StreamSelection::default(),
        fusion: FusionMode::Gated,
        focal: FocalLossConfig::default(),
    };
    let model = TwoStreamModel::new(config, Some(TinyConv::new(5, 2, seed + 7)), seed).unwrap();
    let samples = (0..3)
        .map(|i| {
            let coords = matrix(4, 2, seed + 20 + i);
            let structure = coords.select(ndarray::Axis(0), &tokens);
            let patches = (0..4).map(|k| toy_patch(5, seed + 40 + 4 * i + k)).collect();
            let input = SampleInput {
                structure: Some(structure),
                texture: Some(TextureInput::Patches {
                    patches,
                    tokens: tokens.clone(),
                }),
            };
            (input, (i % 2) as usize)
        })
        .collect();
    (model, samples)
}

fn model_problem(seed: u64) -> Problem {
    let (model, samples) = toy_model(seed);
    let batch: Vec<(&SampleInput, usize)> = samples.iter().map(|(s, l)| (s, *l)).collect();
    let (_, analytic) = model.batch_loss_and_grad(&batch).unwrap();
    let theta = model.to_flat();
    let f = move |t: &[f64]| {
        let mut m = model.clone();
        m.set_flat(t);
        let total: f64 = samples
            .iter()
            .map(|(s, l)| m.loss(s, *l).unwrap().objective())
            .sum();
        total / samples.len() as f64
    };
    (theta, analytic, Box::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let f = |t: &[f64]| 3.0 * t[0] - 2.0 * t[1] + 0.5;
        let numeric = central_difference(&f, &[0.3, -1.7], 1e-5);
        assert!(max_relative_error(&[3.0, -2.0], &numeric) < 1e-9);
    }

    #[test]
    fn every_component_passes() {
        let reports = run_all(&CheckOptions {
            seed: 42,
            eps: 1e-5,
            corrupt: None,
        });
        assert_eq!(reports.len(), COMPONENTS.len());
        for r in &reports {
            assert!(r.passed(), "{} max rel error {}", r.component, r.max_relative_error);
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let reports = run_all(&CheckOptions {
            seed: 42,
            eps: 1e-5,
            corrupt: Some("attention".into()),
        });
        let bad: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.component.as_str()).collect();
        assert_eq!(bad, vec!["attention"]);
    }
}
