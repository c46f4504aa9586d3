//! Jacobian of the gradient-flow dynamics with respect to the flat state.
//!
//! Row index is the velocity component, column index the state component. Because the
//! flow is `θ̇ = −∇C(θ)`, the Jacobian is `−Hessian(C)` and therefore symmetric; the
//! block formulas below are written so that mirrored entries are computed with identical
//! floating-point operations.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{vector_field, Activation, Batch, Dims, Params, SampleTerms};
use crate::state::{flatten, unflatten, StateIndexMap};

/// Default relative step of the finite-difference oracle.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub batch_id: usize,
    pub step: usize,
}

impl JacobianMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        JacobianMatrix { matrix, batch_id: 0, step: 0 }
    }

    pub fn with_meta(mut self, batch_id: usize, step: usize) -> Self {
        self.batch_id = batch_id;
        self.step = step;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for r in 0..m.nrows() {
            for c in (r + 1)..m.ncols() {
                worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|v| v.is_finite())
    }
}

pub fn jacobian_analytic(params: &Params, batch: &Batch) -> Result<JacobianMatrix> {
    let dims = params.dims();
    batch.check_against(dims)?;
    let mut out = DMatrix::zeros(dims.state_dim(), dims.state_dim());
    accumulate_analytic(params, batch, &mut out);
    Ok(JacobianMatrix::new(out))
}

/// Writes the batch-mean Jacobian into `out` (overwritten). Batch assumed validated.
pub(crate) fn accumulate_analytic(params: &Params, batch: &Batch, out: &mut DMatrix<f64>) {
    let dims = params.dims();
    let map = StateIndexMap::new(dims);
    let Dims { n1, n2, n3 } = dims;
    out.fill(0.0);

    // [W32ᵀ W32]_{jl}, summed in the same order for (j,l) and (l,j)
    let mut gram = vec![0.0; n2 * n2];
    for j in 0..n2 {
        for l in 0..n2 {
            let mut acc = 0.0;
            for k in 0..n3 {
                acc += params.w32[(k, j)] * params.w32[(k, l)];
            }
            gram[j * n2 + l] = acc;
        }
    }

    let w21_rows = 0..map.w32_offset();
    let w32_rows = map.w32_offset()..map.b1_offset();
    let b1_rows = map.b1_offset()..map.b2_offset();
    let b2_rows = map.b2_offset()..map.dim();

    let mut asm = Assembler::new(out);
    let mut t = SampleTerms::new(dims);
    for (x, y) in batch.samples() {
        t.evaluate(params, x, y);
        let w = &params.w32;

        // hidden–hidden curvature: δ_jl σ''(d_j)[W32ᵀ r]_j − σ'(d_j)σ'(d_l)[W32ᵀW32]_jl
        let hh = |j: usize, l: usize| {
            let delta = if j == l { t.s2[j] * t.back[j] } else { 0.0 };
            delta - t.s1[j] * t.s1[l] * gram[j * n2 + l]
        };
        // hidden unit `a` (of a W21/b1 coordinate) against W32_{n b}: δ_ab r_n − σ(d_b) W32_{n a}
        let mixed = |a: usize, b: usize, n: usize| {
            let delta = if a == b { t.residual[n] } else { 0.0 };
            delta - t.s0[b] * w[(n, a)]
        };

        // ∂Ẇ21/∂W21
        let mut blk = asm.block(1, w21_rows.clone(), w21_rows.clone());
        for i in 0..n1 {
            for j in 0..n2 {
                for m in 0..n1 {
                    for l in 0..n2 {
                        blk.add(map.w21(j, i), map.w21(l, m), 2.0 * x[i] * x[m] * hh(j, l));
                    }
                }
            }
        }
        // ∂Ẇ21/∂W32
        let mut blk = asm.block(2, w21_rows.clone(), w32_rows.clone());
        for i in 0..n1 {
            for j in 0..n2 {
                for l in 0..n2 {
                    for n in 0..n3 {
                        blk.add(map.w21(j, i), map.w32(n, l), 2.0 * (x[i] * t.s1[j]) * mixed(j, l, n));
                    }
                }
            }
        }
        // ∂Ẇ21/∂b1
        let mut blk = asm.block(3, w21_rows.clone(), b1_rows.clone());
        for i in 0..n1 {
            for j in 0..n2 {
                for l in 0..n2 {
                    blk.add(map.w21(j, i), map.b1(l), 2.0 * x[i] * hh(j, l));
                }
            }
        }
        // ∂Ẇ21/∂b2
        let mut blk = asm.block(4, w21_rows.clone(), b2_rows.clone());
        for i in 0..n1 {
            for j in 0..n2 {
                for n in 0..n3 {
                    blk.add(map.w21(j, i), map.b2(n), -2.0 * (x[i] * t.s1[j]) * w[(n, j)]);
                }
            }
        }

        // ∂Ẇ32/∂W21
        let mut blk = asm.block(5, w32_rows.clone(), w21_rows.clone());
        for j in 0..n2 {
            for k in 0..n3 {
                for m in 0..n1 {
                    for l in 0..n2 {
                        blk.add(map.w32(k, j), map.w21(l, m), 2.0 * (x[m] * t.s1[l]) * mixed(l, j, k));
                    }
                }
            }
        }
        // ∂Ẇ32/∂W32
        let mut blk = asm.block(6, w32_rows.clone(), w32_rows.clone());
        for j in 0..n2 {
            for k in 0..n3 {
                for l in 0..n2 {
                    for n in 0..n3 {
                        let v = if k == n { -2.0 * (t.s0[j] * t.s0[l]) } else { 0.0 };
                        blk.add(map.w32(k, j), map.w32(n, l), v);
                    }
                }
            }
        }
        // ∂Ẇ32/∂b1
        let mut blk = asm.block(7, w32_rows.clone(), b1_rows.clone());
        for j in 0..n2 {
            for k in 0..n3 {
                for l in 0..n2 {
                    blk.add(map.w32(k, j), map.b1(l), 2.0 * t.s1[l] * mixed(l, j, k));
                }
            }
        }
        // ∂Ẇ32/∂b2
        let mut blk = asm.block(8, w32_rows.clone(), b2_rows.clone());
        for j in 0..n2 {
            for k in 0..n3 {
                for n in 0..n3 {
                    let v = if k == n { -2.0 * t.s0[j] } else { 0.0 };
                    blk.add(map.w32(k, j), map.b2(n), v);
                }
            }
        }

        // ∂ḃ1/∂W21
        let mut blk = asm.block(9, b1_rows.clone(), w21_rows.clone());
        for j in 0..n2 {
            for m in 0..n1 {
                for l in 0..n2 {
                    blk.add(map.b1(j), map.w21(l, m), 2.0 * x[m] * hh(j, l));
                }
            }
        }
        // ∂ḃ1/∂W32
        let mut blk = asm.block(10, b1_rows.clone(), w32_rows.clone());
        for j in 0..n2 {
            for l in 0..n2 {
                for n in 0..n3 {
                    blk.add(map.b1(j), map.w32(n, l), 2.0 * t.s1[j] * mixed(j, l, n));
                }
            }
        }
        // ∂ḃ1/∂b1
        let mut blk = asm.block(11, b1_rows.clone(), b1_rows.clone());
        for j in 0..n2 {
            for l in 0..n2 {
                blk.add(map.b1(j), map.b1(l), 2.0 * hh(j, l));
            }
        }
        // ∂ḃ1/∂b2
        let mut blk = asm.block(12, b1_rows.clone(), b2_rows.clone());
        for j in 0..n2 {
            for n in 0..n3 {
                blk.add(map.b1(j), map.b2(n), -2.0 * t.s1[j] * w[(n, j)]);
            }
        }

        // ∂ḃ2/∂W21
        let mut blk = asm.block(13, b2_rows.clone(), w21_rows.clone());
        for k in 0..n3 {
            for m in 0..n1 {
                for l in 0..n2 {
                    blk.add(map.b2(k), map.w21(l, m), -2.0 * (x[m] * t.s1[l]) * w[(k, l)]);
                }
            }
        }
        // ∂ḃ2/∂W32
        let mut blk = asm.block(14, b2_rows.clone(), w32_rows.clone());
        for k in 0..n3 {
            for l in 0..n2 {
                for n in 0..n3 {
                    let v = if k == n { -2.0 * t.s0[l] } else { 0.0 };
                    blk.add(map.b2(k), map.w32(n, l), v);
                }
            }
        }
        // ∂ḃ2/∂b1
        let mut blk = asm.block(15, b2_rows.clone(), b1_rows.clone());
        for k in 0..n3 {
            for l in 0..n2 {
                blk.add(map.b2(k), map.b1(l), -2.0 * t.s1[l] * w[(k, l)]);
            }
        }
        // ∂ḃ2/∂b2
        let mut blk = asm.block(16, b2_rows.clone(), b2_rows.clone());
        for k in 0..n3 {
            for n in 0..n3 {
                blk.add(map.b2(k), map.b2(n), if k == n { -2.0 } else { 0.0 });
            }
        }
    }
    asm.finish();

    let inv = 1.0 / batch.len() as f64;
    *out *= inv;
}

/// Accumulates block contributions; debug builds record which block owns each entry
/// and panic if a block writes outside its index range or over another block.
struct Assembler<'a> {
    out: &'a mut DMatrix<f64>,
    #[cfg(debug_assertions)]
    owner: Vec<u8>,
}

impl<'a> Assembler<'a> {
    fn new(out: &'a mut DMatrix<f64>) -> Self {
        #[cfg(debug_assertions)]
        let owner = vec![0; out.nrows() * out.ncols()];
        Assembler {
            out,
            #[cfg(debug_assertions)]
            owner,
        }
    }

    fn block(&mut self, id: u8, rows: Range<usize>, cols: Range<usize>) -> BlockWriter<'_, 'a> {
        BlockWriter { asm: self, id, rows, cols }
    }

    fn finish(self) {
        #[cfg(debug_assertions)]
        assert!(self.owner.iter().all(|&o| o != 0), "jacobian entries left unassigned by every block");
    }
}

struct BlockWriter<'b, 'a> {
    asm: &'b mut Assembler<'a>,
    id: u8,
    rows: Range<usize>,
    cols: Range<usize>,
}

impl BlockWriter<'_, '_> {
    #[inline]
    fn add(&mut self, row: usize, col: usize, value: f64) {
        #[cfg(debug_assertions)]
        {
            assert!(
                self.rows.contains(&row) && self.cols.contains(&col),
                "block {} wrote ({row},{col}) outside rows {:?} cols {:?}",
                self.id,
                self.rows,
                self.cols
            );
            let n = self.asm.out.nrows();
            let slot = &mut self.asm.owner[col * n + row];
            assert!(*slot == 0 || *slot == self.id, "entry ({row},{col}) written by blocks {} and {}", *slot, self.id);
            *slot = self.id;
        }
        #[cfg(not(debug_assertions))]
        let _ = (&self.rows, &self.cols, self.id);
        self.asm.out[(row, col)] += value;
    }
}

/// Central-difference Jacobian of the vector field, step `h·max(1, |θ_m|)` per coordinate.
pub fn jacobian_fd(params: &Params, batch: &Batch, h: f64) -> Result<JacobianMatrix> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::input(format!("finite-difference step must be positive, got {h}")));
    }
    let dims = params.dims();
    batch.check_against(dims)?;
    let theta = flatten(params);
    let d = theta.len();
    let mut out = DMatrix::zeros(d, d);
    let velocity = |state: &DVector<f64>| -> Result<DVector<f64>> {
        let p = unflatten(state, dims, params.activation)?;
        Ok(flatten(&vector_field(&p, batch)?))
    };
    for m in 0..d {
        let step = h * theta[m].abs().max(1.0);
        let mut plus = theta.clone();
        plus[m] += step;
        let mut minus = theta.clone();
        minus[m] -= step;
        let column = (velocity(&plus)? - velocity(&minus)?) / (2.0 * step);
        out.set_column(m, &column);
    }
    Ok(JacobianMatrix::new(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub max_abs_error: f64,
    pub max_symmetry_defect: f64,
}

impl JacobianReport {
    fn merge(self, other: JacobianReport) -> JacobianReport {
        JacobianReport {
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            max_symmetry_defect: self.max_symmetry_defect.max(other.max_symmetry_defect),
        }
    }
}

pub fn check_jacobian(params: &Params, batch: &Batch, h: f64) -> Result<JacobianReport> {
    let analytic = jacobian_analytic(params, batch)?;
    let fd = jacobian_fd(params, batch, h)?;
    let max_abs_error = analytic.matrix.iter().zip(fd.matrix.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(JacobianReport { max_abs_error, max_symmetry_defect: analytic.max_symmetry_defect() })
}

/// Worst-case [`check_jacobian`] over `trials` random states with entries in `[−2, 2]`,
/// each paired with a fresh batch drawn from the regression task.
///
/// For ReLU, states are redrawn until every pre-activation sits at least `1e−3` away
/// from the kink.
pub fn check_jacobian_random(
    dims: Dims,
    activation: Activation,
    trials: usize,
    batch_size: usize,
    h: f64,
    seed: u64,
) -> Result<JacobianReport> {
    dims.validate()?;
    if dims.n1 != 2 || dims.n3 != 1 {
        return Err(Error::input("random Jacobian checks draw batches from the 2-input, 1-output regression task"));
    }
    if batch_size == 0 {
        return Err(Error::input("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = JacobianReport { max_abs_error: 0.0, max_symmetry_defect: 0.0 };
    for _ in 0..trials {
        let batch = crate::experiment::generate_dataset(batch_size, rng.random())?.to_batch();
        let params = loop {
            let mut p = Params::zeros(dims, activation);
            for v in p.w21.iter_mut().chain(p.w32.iter_mut()).chain(p.b1.iter_mut()).chain(p.b2.iter_mut()) {
                *v = rng.random_range(-2.0..=2.0);
            }
            if activation != Activation::Relu || min_abs_preactivation(&p, &batch) > 1e-3 {
                break p;
            }
        };
        report = report.merge(check_jacobian(&params, &batch, h)?);
    }
    Ok(report)
}

fn min_abs_preactivation(params: &Params, batch: &Batch) -> f64 {
    let mut t = SampleTerms::new(params.dims());
    let mut worst = f64::INFINITY;
    for (x, y) in batch.samples() {
        t.evaluate(params, x, y);
        worst = t.d.iter().fold(worst, |w, d| w.min(d.abs()));
    }
    worst
}
