use ndarray::{Array1, Array2, ArrayView1};

use super::{Init, Parameters, ParamVisitor, ParamVisitorMut};

/// Affine layer `y = W x + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn new(input: usize, output: usize, init: &mut Init) -> Self {
        Self {
            w: init.matrix(output, input, input),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.w.dot(&x) + &self.b
    }

    /// Accumulates `dW`, `db` into `grads` and returns `dx`.
    pub fn backward(&self, x: ArrayView1<f64>, dy: ArrayView1<f64>, grads: &mut Dense) -> Array1<f64> {
        for (mut row, &g) in grads.w.rows_mut().into_iter().zip(dy.iter()) {
            if g != 0.0 {
                row.scaled_add(g, &x);
            }
        }
        grads.b += &dy;
        self.w.t().dot(&dy)
    }
}

impl Parameters for Dense {
    fn visit(&self, prefix: &str, f: &mut ParamVisitor<'_>) {
        f(&format!("{prefix}.w"), self.w.shape(), self.w.as_slice().unwrap());
        f(&format!("{prefix}.b"), self.b.shape(), self.b.as_slice().unwrap());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut ParamVisitorMut<'_>) {
        f(&format!("{prefix}.w"), self.w.as_slice_mut().unwrap());
        f(&format!("{prefix}.b"), self.b.as_slice_mut().unwrap());
    }
}
