use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{RSequence, TangentFrame};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClvMethod {
    Ginelli,
    Estimated,
}

/// Covariant Lyapunov vectors at one time point, column `q` belonging to exponent `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClvSet {
    pub vectors: DMatrix<f64>,
    pub method: ClvMethod,
    /// Interval index of the frame the vectors live at.
    pub interval: usize,
}

/// Covariant Lyapunov vectors by backward iteration of the R factors.
///
/// `frames[k]` is the frame at the start of interval `k` and `rs.factors[k]` its factor,
/// so `frames.len() == rs.len()`. A random upper-triangular coefficient matrix seeded by
/// `seed` is placed at the end of the run and pulled back with `C_k ∝ R_k⁻¹·C_{k+1}`.
/// The final `discard_tail` intervals only serve convergence; vectors are returned for
/// intervals `0..rs.len() − discard_tail`, in increasing time order.
pub fn ginelli_clvs(frames: &[TangentFrame], rs: &RSequence, discard_tail: usize, seed: u64) -> Result<Vec<ClvSet>> {
    let n = rs.len();
    if frames.len() != n {
        return Err(Error::input(format!("{} frames for {} R factors", frames.len(), n)));
    }
    if discard_tail == 0 || discard_tail >= n {
        return Err(Error::input(format!("discard_tail must lie in 1..{n}, got {discard_tail}")));
    }
    let dim = frames[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        for r in 0..=c {
            coeffs[(r, c)] = rng.sample::<f64, _>(StandardNormal);
        }
        // keep the diagonal clear of zero so every column stays independent
        coeffs[(c, c)] = coeffs[(c, c)].abs() + 0.1;
    }
    normalize_columns(&mut coeffs)?;

    let emitted = n - discard_tail;
    let mut out = Vec::with_capacity(emitted);
    for k in (0..n).rev() {
        coeffs = pull_back(&rs.factors[k], &coeffs)?;
        if k < emitted {
            out.push(ClvSet { vectors: &frames[k].q * &coeffs, method: ClvMethod::Ginelli, interval: frames[k].interval });
        }
    }
    out.reverse();
    Ok(out)
}

/// Short-window CLV estimate that uses no data beyond the current interval.
///
/// The trailing buffers hold the last `window_intervals` frames and their factors. The
/// coefficient matrix starts as the identity at the end of the window and is pulled back
/// through every factor; the estimate refers to the window's first frame, i.e. it lags
/// the present by `window_intervals·dτ`.
pub fn estimate_clvs_online(frames: &[TangentFrame], factors: &[DMatrix<f64>], window_intervals: usize) -> Result<ClvSet> {
    if window_intervals == 0 {
        return Err(Error::input("CLV estimation window must hold at least one interval"));
    }
    if frames.len() != window_intervals || factors.len() != window_intervals {
        return Err(Error::input(format!(
            "CLV window of {window_intervals} intervals got {} frames and {} factors",
            frames.len(),
            factors.len()
        )));
    }
    let dim = frames[0].dim();
    let mut coeffs = DMatrix::identity(dim, dim);
    for r in factors.iter().rev() {
        coeffs = pull_back(r, &coeffs)?;
    }
    Ok(ClvSet { vectors: &frames[0].q * coeffs, method: ClvMethod::Estimated, interval: frames[0].interval })
}

/// `normalize_columns(R⁻¹·C)` by back substitution; both operands upper triangular.
fn pull_back(r: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = r.nrows();
    let mut x = DMatrix::zeros(d, d);
    for col in 0..d {
        for row in (0..=col).rev() {
            let diag = r[(row, row)];
            if diag == 0.0 || !diag.is_finite() {
                return Err(Error::numerical(format!("singular R factor: R[{row},{row}] = {diag}")));
            }
            let mut acc = c[(row, col)];
            for k in (row + 1)..=col {
                acc -= r[(row, k)] * x[(k, col)];
            }
            x[(row, col)] = acc / diag;
        }
    }
    normalize_columns(&mut x)?;
    Ok(x)
}

fn normalize_columns(m: &mut DMatrix<f64>) -> Result<()> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::numerical("degenerate CLV coefficient column"));
        }
        col /= norm;
    }
    Ok(())
}

/// Pairwise `|cos θ_ij|` between CLVs.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleStats {
    pub cos_abs: DMatrix<f64>,
    /// Mean of `|cos θ_ij|` over the `D(D−1)/2` unordered pairs.
    pub mean_cos_abs: f64,
}

impl AngleStats {
    /// Upper-triangle entries `(i < j)` in row-major order.
    pub fn pairs(&self) -> Vec<f64> {
        let d = self.cos_abs.nrows();
        let mut out = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in (i + 1)..d {
                out.push(self.cos_abs[(i, j)]);
            }
        }
        out
    }
}

pub fn clv_angles(v: &ClvSet) -> AngleStats {
    let d = v.vectors.ncols();
    let mut cos_abs = DMatrix::zeros(d, d);
    let mut sum = 0.0;
    for i in 0..d {
        cos_abs[(i, i)] = v.vectors.column(i).dot(&v.vectors.column(i)).abs();
        for j in (i + 1)..d {
            let c = v.vectors.column(i).dot(&v.vectors.column(j)).abs();
            cos_abs[(i, j)] = c;
            cos_abs[(j, i)] = c;
            sum += c;
        }
    }
    let pairs = d * d.saturating_sub(1) / 2;
    let mean_cos_abs = if pairs == 0 { 0.0 } else { sum / pairs as f64 };
    AngleStats { cos_abs, mean_cos_abs }
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    smallest.acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::propagate_interval;
    use nalgebra::DVector;

    struct Trajectory {
        frames: Vec<TangentFrame>,
        rs: RSequence,
    }

    fn frozen(j: &DMatrix<f64>, dt: f64, steps: usize, intervals: usize, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frame = TangentFrame::random(j.nrows(), &mut rng);
        let mut frames = Vec::new();
        let mut rs = RSequence::new(dt * steps as f64);
        for _ in 0..intervals {
            let (next, r) = propagate_interval(&frame, |_| Ok(j.clone()), dt, steps).unwrap();
            frames.push(frame);
            rs.push(r);
            frame = next;
        }
        Trajectory { frames, rs }
    }

    #[test]
    fn diagonal_system_converges_to_axes() {
        let diag = DVector::from_row_slice(&[0.5, -0.5, -1.5, -2.5, -3.5]);
        let t = frozen(&DMatrix::from_diagonal(&diag), 0.01, 20, 300, 1);
        let clvs = ginelli_clvs(&t.frames, &t.rs, 100, 42).unwrap();
        assert_eq!(clvs.len(), 200);
        // after 100 intervals forward (frame transient) and ≥ 100 backward
        for set in &clvs[100..] {
            for q in 0..5 {
                assert!(set.vectors[(q, q)].abs() > 1.0 - 1e-6, "interval {} vector {q}", set.interval);
            }
        }
    }

    #[test]
    fn columns_have_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let j = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-2.0..2.0));
        let t = frozen(&j, 0.01, 20, 60, 3);
        for set in ginelli_clvs(&t.frames, &t.rs, 20, 5).unwrap() {
            for c in set.vectors.column_iter() {
                assert!((c.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vectors_are_covariant_under_the_tangent_map() {
        // non-normal frozen dynamics: CLVs are the eigenvectors, not orthogonal
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(4, 4) * 2.0;
        let lambda = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.0, -1.0, -2.0]));
        let j = &p * lambda * p.clone().try_inverse().unwrap();
        let (dt, steps) = (0.01, 10);
        let t = frozen(&j, dt, steps, 200, 6);
        let clvs = ginelli_clvs(&t.frames, &t.rs, 60, 7).unwrap();
        let mut m = DMatrix::<f64>::identity(4, 4);
        for _ in 0..steps {
            m = (DMatrix::<f64>::identity(4, 4) + &j * dt) * m;
        }
        for k in 60..clvs.len() - 1 {
            for q in 0..4 {
                let pushed = &m * clvs[k].vectors.column(q);
                let cos = pushed.dot(&clvs[k + 1].vectors.column(q)).abs() / pushed.norm();
                assert!(cos > 1.0 - 1e-6, "interval {k} vector {q}: {cos}");
            }
        }
        // and they are the eigenvectors of J
        for q in 0..4 {
            let eig = p.column(q).normalize();
            assert!(clvs[100].vectors.column(q).dot(&eig).abs() > 1.0 - 1e-6);
        }
    }

    #[test]
    fn repeated_exponent_spans_the_eigenplane() {
        let diag = DVector::from_row_slice(&[0.0, -1.0, -1.0, -3.0]);
        let t = frozen(&DMatrix::from_diagonal(&diag), 0.01, 20, 300, 8);
        let clvs = ginelli_clvs(&t.frames, &t.rs, 100, 9).unwrap();
        let plane = DMatrix::from_columns(&[DVector::from_row_slice(&[0.0, 1.0, 0.0, 0.0]), DVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0])]);
        let v = &clvs[150].vectors;
        let pair = DMatrix::from_columns(&[v.column(1).into_owned(), v.column(2).into_owned()]);
        assert!(subspace_angle(&pair, &plane) < 1e-4);
    }

    #[test]
    fn online_estimate_matches_ginelli_for_normal_dynamics() {
        let diag = DVector::from_row_slice(&[1.0, -0.5, -2.0, -4.0]);
        let t = frozen(&DMatrix::from_diagonal(&diag), 0.01, 20, 200, 10);
        let ginelli = ginelli_clvs(&t.frames, &t.rs, 40, 11).unwrap();
        let w = 10;
        for start in [100, 120, 150] {
            let est = estimate_clvs_online(&t.frames[start..start + w], &t.rs.factors[start..start + w], w).unwrap();
            assert_eq!(est.interval, t.frames[start].interval);
            for q in 0..4 {
                let cos = est.vectors.column(q).dot(&ginelli[start].vectors.column(q)).abs();
                assert!(cos > 1.0 - 1e-6, "start {start} vector {q}: {cos}");
            }
        }
    }

    #[test]
    fn single_interval_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let j = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = frozen(&j, 0.01, 20, 3, 13);
        let est = estimate_clvs_online(&t.frames[1..2], &t.rs.factors[1..2], 1).unwrap();
        // one pull-back: first column is still the leading Gram–Schmidt direction
        let expected = &t.frames[1].q * pull_back(&t.rs.factors[1], &DMatrix::identity(3, 3)).unwrap();
        assert!((est.vectors.column(0) - t.frames[1].q.column(0)).amax() < 1e-14);
        assert!((&est.vectors - expected).amax() < 1e-14);
        assert!(estimate_clvs_online(&t.frames[..2], &t.rs.factors[..1], 2).is_err());
        assert!(estimate_clvs_online(&[], &[], 0).is_err());
    }

    #[test]
    fn singular_factor_is_reported() {
        let mut r = DMatrix::identity(3, 3);
        r[(1, 1)] = 0.0;
        let frames = vec![TangentFrame::identity(3)];
        assert!(matches!(estimate_clvs_online(&frames, &[r], 1), Err(Error::Numerical(_))));
    }

    #[test]
    fn angle_examples() {
        let ortho = ClvSet { vectors: DMatrix::identity(9, 9), method: ClvMethod::Ginelli, interval: 0 };
        let stats = clv_angles(&ortho);
        assert_eq!(stats.mean_cos_abs, 0.0);
        assert_eq!(stats.pairs().len(), 36);

        let mut dup = DMatrix::identity(3, 3);
        dup.set_column(1, &DVector::from_row_slice(&[1.0, 0.0, 0.0]));
        let stats = clv_angles(&ClvSet { vectors: dup, method: ClvMethod::Estimated, interval: 0 });
        assert_eq!(stats.cos_abs[(0, 1)], 1.0);

        // pairwise cosines 0.5, 0, 0
        let s = 0.75f64.sqrt();
        let v = DMatrix::from_columns(&[
            DVector::from_row_slice(&[1.0, 0.0, 0.0]),
            DVector::from_row_slice(&[0.5, s, 0.0]),
            DVector::from_row_slice(&[0.0, 0.0, 1.0]),
        ]);
        let stats = clv_angles(&ClvSet { vectors: v, method: ClvMethod::Ginelli, interval: 0 });
        assert!((stats.mean_cos_abs - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(stats.cos_abs, stats.cos_abs.transpose());
    }

    #[test]
    fn rejects_bad_tail() {
        let t = frozen(&DMatrix::identity(2, 2), 0.01, 1, 5, 14);
        assert!(ginelli_clvs(&t.frames, &t.rs, 0, 0).is_err());
        assert!(ginelli_clvs(&t.frames, &t.rs, 5, 0).is_err());
        assert!(ginelli_clvs(&t.frames[..4], &t.rs, 1, 0).is_err());
    }
}
