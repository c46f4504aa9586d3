//! Three-layer feed-forward network with a linear output layer, its mean-squared-error
//! cost and the gradient-flow vector field on its weights and biases.
//!
//! All batch quantities are means over samples, so the integration step keeps its
//! scale for any batch size.

mod activation;

pub use activation::{activation_eval, Activation, ActivationValue};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths `(N1, N2, N3)`: inputs, hidden units, outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Dims {
    pub const fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Dims { n1, n2, n3 }
    }

    /// Dimension of the flattened state, `N1·N2 + N2·N3 + N2 + N3`.
    pub const fn state_dim(&self) -> usize {
        self.n1 * self.n2 + self.n2 * self.n3 + self.n2 + self.n3
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::input(format!("layer widths must be positive, got {self:?}")));
        }
        Ok(())
    }
}

impl Default for Dims {
    fn default() -> Self {
        Dims::new(2, 2, 1)
    }
}

/// Weights and biases of the network.
///
/// `w21` is `N2×N1` (input → hidden), `w32` is `N3×N2` (hidden → output).
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w21: DMatrix<f64>,
    pub w32: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub activation: Activation,
}

impl Params {
    pub fn zeros(dims: Dims, activation: Activation) -> Self {
        Params {
            w21: DMatrix::zeros(dims.n2, dims.n1),
            w32: DMatrix::zeros(dims.n3, dims.n2),
            b1: DVector::zeros(dims.n2),
            b2: DVector::zeros(dims.n3),
            activation,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.w21.ncols(), self.w21.nrows(), self.w32.nrows())
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        dims.validate()?;
        if self.w32.ncols() != dims.n2 || self.b1.len() != dims.n2 || self.b2.len() != dims.n3 {
            return Err(Error::input(format!(
                "inconsistent parameter shapes: w21 {}x{}, w32 {}x{}, b1 {}, b2 {}",
                self.w21.nrows(),
                self.w21.ncols(),
                self.w32.nrows(),
                self.w32.ncols(),
                self.b1.len(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w21.iter().chain(self.w32.iter()).chain(self.b1.iter()).chain(self.b2.iter()).all(|v| v.is_finite())
    }

    /// `self += scale · other`, shapes assumed equal.
    pub fn axpy(&mut self, scale: f64, other: &Params) {
        self.w21.zip_apply(&other.w21, |a, b| *a += scale * b);
        self.w32.zip_apply(&other.w32, |a, b| *a += scale * b);
        self.b1.axpy(scale, &other.b1, 1.0);
        self.b2.axpy(scale, &other.b2, 1.0);
    }
}

/// Training samples stored row-major: sample `s` is `inputs[s·N1..]`, `targets[s·N3..]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    n1: usize,
    n3: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Batch {
    pub fn new(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::input(format!(
                "batch needs equal, non-zero numbers of inputs and targets (got {} and {})",
                inputs.len(),
                targets.len()
            )));
        }
        let n1 = inputs[0].len();
        let n3 = targets[0].len();
        let mut batch = Batch::with_capacity(n1, n3, inputs.len());
        for (x, y) in inputs.iter().zip(targets) {
            if x.len() != n1 || y.len() != n3 {
                return Err(Error::input("ragged batch rows"));
            }
            batch.push(x, y);
        }
        Ok(batch)
    }

    pub fn with_capacity(n1: usize, n3: usize, capacity: usize) -> Self {
        Batch {
            n1,
            n3,
            inputs: Vec::with_capacity(capacity * n1),
            targets: Vec::with_capacity(capacity * n3),
        }
    }

    pub fn push(&mut self, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.n1);
        debug_assert_eq!(y.len(), self.n3);
        self.inputs.extend_from_slice(x);
        self.targets.extend_from_slice(y);
    }

    pub fn clear(&mut self) {
        self.inputs.clear();
        self.targets.clear();
    }

    pub fn len(&self) -> usize {
        self.inputs.len().checked_div(self.n1).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.n1
    }

    pub fn target_dim(&self) -> usize {
        self.n3
    }

    #[inline]
    pub fn sample(&self, s: usize) -> (&[f64], &[f64]) {
        (
            &self.inputs[s * self.n1..(s + 1) * self.n1],
            &self.targets[s * self.n3..(s + 1) * self.n3],
        )
    }

    pub fn samples(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        (0..self.len()).map(move |s| self.sample(s))
    }

    /// Single-sample batch, mostly for linearity checks.
    pub fn single(&self, s: usize) -> Batch {
        let (x, y) = self.sample(s);
        let mut b = Batch::with_capacity(self.n1, self.n3, 1);
        b.push(x, y);
        b
    }

    pub(crate) fn check_against(&self, dims: Dims) -> Result<()> {
        if self.is_empty() {
            return Err(Error::input("empty batch"));
        }
        if self.n1 != dims.n1 || self.n3 != dims.n3 {
            return Err(Error::input(format!(
                "batch has {} inputs / {} targets per sample, network expects {} / {}",
                self.n1, self.n3, dims.n1, dims.n3
            )));
        }
        Ok(())
    }
}

/// Pre-activations and layer outputs of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub d: DVector<f64>,
    pub a1: DVector<f64>,
    pub a2: DVector<f64>,
}

pub fn forward(params: &Params, x: &[f64]) -> Result<ForwardTrace> {
    let dims = params.dims();
    if x.len() != dims.n1 {
        return Err(Error::input(format!("input has length {}, expected {}", x.len(), dims.n1)));
    }
    let mut d = DVector::zeros(dims.n2);
    let mut a1 = DVector::zeros(dims.n2);
    for j in 0..dims.n2 {
        let mut acc = params.b1[j];
        for (i, xi) in x.iter().enumerate() {
            acc += params.w21[(j, i)] * xi;
        }
        d[j] = acc;
        a1[j] = params.activation.eval(acc).value;
    }
    // same summation order as `SampleTerms`, so a perfect fit has exactly zero residual
    let a2 = DVector::from_fn(dims.n3, |k, _| {
        let mut acc = params.b2[k];
        for j in 0..dims.n2 {
            acc += params.w32[(k, j)] * a1[j];
        }
        acc
    });
    Ok(ForwardTrace { d, a1, a2 })
}

/// Batch mean of `|y − a2|²`.
pub fn cost(params: &Params, batch: &Batch) -> Result<f64> {
    let dims = params.dims();
    batch.check_against(dims)?;
    let mut terms = SampleTerms::new(dims);
    let mut total = 0.0;
    for (x, y) in batch.samples() {
        terms.evaluate(params, x, y);
        total += terms.residual.iter().map(|r| r * r).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Velocity `−∇θ cost`, returned in the shape of the parameters.
pub fn vector_field(params: &Params, batch: &Batch) -> Result<Params> {
    let dims = params.dims();
    batch.check_against(dims)?;
    let mut out = Params::zeros(dims, params.activation);
    let mut terms = SampleTerms::new(dims);
    for (x, y) in batch.samples() {
        terms.evaluate(params, x, y);
        // with r = y − a2, ∇C = −2r, so every velocity term carries +2r
        for j in 0..dims.n2 {
            let hidden = 2.0 * terms.s1[j] * terms.back[j];
            for (i, xi) in x.iter().enumerate() {
                out.w21[(j, i)] += hidden * xi;
            }
            out.b1[j] += hidden;
            for k in 0..dims.n3 {
                out.w32[(k, j)] += 2.0 * terms.residual[k] * terms.s0[j];
            }
        }
        for k in 0..dims.n3 {
            out.b2[k] += 2.0 * terms.residual[k];
        }
    }
    let inv = 1.0 / batch.len() as f64;
    out.w21 *= inv;
    out.w32 *= inv;
    out.b1 *= inv;
    out.b2 *= inv;
    Ok(out)
}

/// Per-sample quantities shared by the vector field and the Jacobian.
pub(crate) struct SampleTerms {
    pub d: Vec<f64>,
    /// σ(d)
    pub s0: Vec<f64>,
    /// σ'(d)
    pub s1: Vec<f64>,
    /// σ''(d)
    pub s2: Vec<f64>,
    /// y − a2
    pub residual: Vec<f64>,
    /// W32ᵀ (y − a2)
    pub back: Vec<f64>,
}

impl SampleTerms {
    pub fn new(dims: Dims) -> Self {
        SampleTerms {
            d: vec![0.0; dims.n2],
            s0: vec![0.0; dims.n2],
            s1: vec![0.0; dims.n2],
            s2: vec![0.0; dims.n2],
            residual: vec![0.0; dims.n3],
            back: vec![0.0; dims.n2],
        }
    }

    pub fn evaluate(&mut self, params: &Params, x: &[f64], y: &[f64]) {
        let n2 = self.d.len();
        let n3 = self.residual.len();
        for j in 0..n2 {
            let mut acc = params.b1[j];
            for (i, xi) in x.iter().enumerate() {
                acc += params.w21[(j, i)] * xi;
            }
            let v = params.activation.eval(acc);
            self.d[j] = acc;
            self.s0[j] = v.value;
            self.s1[j] = v.first;
            self.s2[j] = v.second;
        }
        for k in 0..n3 {
            let mut a2 = params.b2[k];
            for j in 0..n2 {
                a2 += params.w32[(k, j)] * self.s0[j];
            }
            self.residual[k] = y[k] - a2;
        }
        for j in 0..n2 {
            let mut acc = 0.0;
            for k in 0..n3 {
                acc += params.w32[(k, j)] * self.residual[k];
            }
            self.back[j] = acc;
        }
    }
}
