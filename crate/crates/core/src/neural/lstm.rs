//! Peephole LSTM.
//!
//! Gate blocks are stacked `[input, forget, candidate, output]` in the input and
//! recurrent matrices. Per step, with `c'` the previous cell state:
//!
//! ```text
//! i = σ(W_i x + U_i h' + p_i ⊙ c' + b_i)
//! f = σ(W_f x + U_f h' + p_f ⊙ c' + b_f)
//! g = tanh(W_g x + U_g h' + b_g)
//! c = f ⊙ c' + i ⊙ g
//! o = σ(W_o x + U_o h' + p_o ⊙ c + b_o)
//! h = o ⊙ tanh(c)
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::{sigmoid, Init, Parameters, ParamVisitor, ParamVisitorMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4h x d_in`
    pub w_input: Array2<f64>,
    /// `4h x h`
    pub w_recurrent: Array2<f64>,
    /// `4h`
    pub bias: Array1<f64>,
    /// `3 x h`, rows are the input, forget and output gate peepholes.
    pub peephole: Array2<f64>,
}

impl LstmParams {
    /// Uniform `±1/sqrt(fan_in)` weights, forget-gate bias `+1`.
    pub fn new(input_dim: usize, hidden: usize, init: &mut Init) -> Self {
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self {
            w_input: init.matrix(4 * hidden, input_dim, input_dim),
            w_recurrent: init.matrix(4 * hidden, hidden, hidden),
            bias,
            peephole: init.matrix(3, hidden, hidden),
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_recurrent: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
            peephole: Array2::zeros((3, hidden)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden())
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_recurrent.ncols()
    }
}

impl Parameters for LstmParams {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        f(&format!("{prefix}.w_input"), self.w_input.shape(), self.w_input.as_slice().unwrap());
        f(
            &format!("{prefix}.w_recurrent"),
            self.w_recurrent.shape(),
            self.w_recurrent.as_slice().unwrap(),
        );
        f(&format!("{prefix}.bias"), self.bias.shape(), self.bias.as_slice().unwrap());
        f(&format!("{prefix}.peephole"), self.peephole.shape(), self.peephole.as_slice().unwrap());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        f(&format!("{prefix}.w_input"), self.w_input.as_slice_mut().unwrap());
        f(&format!("{prefix}.w_recurrent"), self.w_recurrent.as_slice_mut().unwrap());
        f(&format!("{prefix}.bias"), self.bias.as_slice_mut().unwrap());
        f(&format!("{prefix}.peephole"), self.peephole.as_slice_mut().unwrap());
    }
}

/// Activations saved for the backward pass. Row `t` of each matrix belongs to step `t`.
#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// `T x 4h`: post-activation gates `[i, f, g, o]`
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
    cells: Array2<f64>,
}

impl LstmCache {
    pub fn cells(&self) -> &Array2<f64> {
        &self.cells
    }
}

/// Runs the recurrence from zero initial state. Returns `T x h` hidden states.
pub fn lstm_forward(params: &LstmParams, inputs: &Array2<f64>) -> Result<(Array2<f64>, LstmCache)> {
    let (steps, d_in) = inputs.dim();
    if steps == 0 {
        return Err(Error::invalid("LSTM needs at least one time step"));
    }
    if d_in != params.input_dim() {
        return Err(Error::invalid(format!(
            "LSTM expects input width {}, got {d_in}",
            params.input_dim()
        )));
    }
    let h = params.hidden();
    // Input projections for all steps at once: T x 4h.
    let pre_input = inputs.dot(&params.w_input.t()) + &params.bias;

    let mut hidden = Array2::zeros((steps, h));
    let mut cells = Array2::zeros((steps, h));
    let mut h_prev = Array2::zeros((steps, h));
    let mut c_prev = Array2::zeros((steps, h));
    let mut gates = Array2::zeros((steps, 4 * h));
    let mut tanh_c = Array2::zeros((steps, h));

    let pi = params.peephole.row(0);
    let pf = params.peephole.row(1);
    let po = params.peephole.row(2);

    let mut hp = Array1::<f64>::zeros(h);
    let mut cp = Array1::<f64>::zeros(h);
    for t in 0..steps {
        let z = &pre_input.row(t) + &params.w_recurrent.dot(&hp);
        let mut g_row = gates.row_mut(t);
        let mut c = Array1::zeros(h);
        let mut tc = Array1::zeros(h);
        let mut hn = Array1::zeros(h);
        for k in 0..h {
            let ig = sigmoid(z[k] + pi[k] * cp[k]);
            let fg = sigmoid(z[h + k] + pf[k] * cp[k]);
            let cand = z[2 * h + k].tanh();
            let ck = fg * cp[k] + ig * cand;
            let og = sigmoid(z[3 * h + k] + po[k] * ck);
            let tck = ck.tanh();
            g_row[k] = ig;
            g_row[h + k] = fg;
            g_row[2 * h + k] = cand;
            g_row[3 * h + k] = og;
            c[k] = ck;
            tc[k] = tck;
            hn[k] = og * tck;
        }
        h_prev.row_mut(t).assign(&hp);
        c_prev.row_mut(t).assign(&cp);
        cells.row_mut(t).assign(&c);
        tanh_c.row_mut(t).assign(&tc);
        hidden.row_mut(t).assign(&hn);
        hp = hn;
        cp = c;
    }
    let cache = LstmCache {
        inputs: inputs.clone(),
        h_prev,
        c_prev,
        gates,
        tanh_c,
        cells,
    };
    Ok((hidden, cache))
}

/// Backpropagation through time. `d_hidden` is the upstream gradient for every
/// hidden state (`T x h`). Parameter gradients accumulate into `grads`; the
/// return value is the gradient with respect to the inputs (`T x d_in`).
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    d_hidden: &Array2<f64>,
    grads: &mut LstmParams,
) -> Array2<f64> {
    let (steps, h) = d_hidden.dim();
    let mut d_pre = Array2::<f64>::zeros((steps, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);

    let pi = params.peephole.row(0);
    let pf = params.peephole.row(1);
    let po = params.peephole.row(2);

    for t in (0..steps).rev() {
        let g = cache.gates.row(t);
        let tc = cache.tanh_c.row(t);
        let c = cache.cells.row(t);
        let cp = cache.c_prev.row(t);
        let mut dz = d_pre.row_mut(t);
        let mut dc_prev = Array1::zeros(h);
        for k in 0..h {
            let (ig, fg, cand, og) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dh = d_hidden[[t, k]] + dh_next[k];
            let dzo = dh * tc[k] * og * (1.0 - og);
            let dc = dc_next[k] + dh * og * (1.0 - tc[k] * tc[k]) + dzo * po[k];
            let dzi = dc * cand * ig * (1.0 - ig);
            let dzf = dc * cp[k] * fg * (1.0 - fg);
            let dzg = dc * ig * (1.0 - cand * cand);
            grads.peephole[[0, k]] += dzi * cp[k];
            grads.peephole[[1, k]] += dzf * cp[k];
            grads.peephole[[2, k]] += dzo * c[k];
            dc_prev[k] = dc * fg + dzi * pi[k] + dzf * pf[k];
            dz[k] = dzi;
            dz[h + k] = dzf;
            dz[2 * h + k] = dzg;
            dz[3 * h + k] = dzo;
        }
        dh_next = params.w_recurrent.t().dot(&dz);
        dc_next = dc_prev;
    }

    grads.w_input += &d_pre.t().dot(&cache.inputs);
    grads.w_recurrent += &d_pre.t().dot(&cache.h_prev);
    grads.bias += &d_pre.sum_axis(Axis(0));
    d_pre.dot(&params.w_input)
}

/// One cell update from explicit state; used to pin the recurrence in tests.
pub fn lstm_cell(
    params: &LstmParams,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let h = params.hidden();
    let z = params.w_input.dot(&x) + params.w_recurrent.dot(&h_prev) + &params.bias;
    let mut hn = Array1::zeros(h);
    let mut cn = Array1::zeros(h);
    for k in 0..h {
        let ig = sigmoid(z[k] + params.peephole[[0, k]] * c_prev[k]);
        let fg = sigmoid(z[h + k] + params.peephole[[1, k]] * c_prev[k]);
        let cand = z[2 * h + k].tanh();
        cn[k] = fg * c_prev[k] + ig * cand;
        let og = sigmoid(z[3 * h + k] + params.peephole[[2, k]] * cn[k]);
        hn[k] = og * cn[k].tanh();
    }
    (hn, cn)
}
