use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Orthonormal basis of the tangent space at the start of an orthogonalization interval.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    /// Column `q` is the `q`-th Gram–Schmidt direction.
    pub q: DMatrix<f64>,
    /// Number of completed orthogonalization intervals.
    pub interval: usize,
}

impl TangentFrame {
    pub fn identity(dim: usize) -> Self {
        TangentFrame { q: DMatrix::identity(dim, dim), interval: 0 }
    }

    /// Haar-like random orthonormal frame (QR of a Gaussian matrix).
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (q, _) = qr_positive(g).expect("gaussian matrix is almost surely nonsingular");
        TangentFrame { q, interval: 0 }
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `max |QᵀQ − I|`
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.q.tr_mul(&self.q);
        let d = self.dim();
        (gram - DMatrix::<f64>::identity(d, d)).amax()
    }
}

/// Accumulates the per-step tangent maps `I + dt·J` of one interval and closes it with a
/// QR factorization.
#[derive(Clone, Debug)]
pub struct TangentPropagator {
    frame: TangentFrame,
    work: DMatrix<f64>,
    scratch: DMatrix<f64>,
    steps_in_interval: usize,
}

impl TangentPropagator {
    pub fn new(frame: TangentFrame) -> Self {
        let work = frame.q.clone();
        let scratch = work.clone();
        TangentPropagator { frame, work, scratch, steps_in_interval: 0 }
    }

    /// Frame at the start of the current interval.
    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn steps_in_interval(&self) -> usize {
        self.steps_in_interval
    }

    /// `work ← (I + dt·J)·work`
    pub fn step(&mut self, jacobian: &DMatrix<f64>, dt: f64) {
        self.scratch.copy_from(&self.work);
        self.scratch.gemm(dt, jacobian, &self.work, 1.0);
        std::mem::swap(&mut self.scratch, &mut self.work);
        self.steps_in_interval += 1;
    }

    /// Factorizes the propagated frame as `Q_new·R` (positive diagonal), adopts `Q_new`
    /// and returns `R`.
    pub fn close_interval(&mut self) -> Result<DMatrix<f64>> {
        if !self.work.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite tangent vectors in interval {}",
                self.frame.interval
            )));
        }
        let (q, r) = qr_positive(self.work.clone())?;
        self.frame.q.copy_from(&q);
        self.frame.interval += 1;
        self.work.copy_from(&q);
        self.steps_in_interval = 0;
        Ok(r)
    }
}

/// Propagates `frame` through `steps` explicit-Euler tangent steps, asking `jacobian_at`
/// for the Jacobian of each step, then re-orthonormalizes.
pub fn propagate_interval<F>(
    frame: &TangentFrame,
    mut jacobian_at: F,
    dt: f64,
    steps: usize,
) -> Result<(TangentFrame, DMatrix<f64>)>
where
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::input(format!("dt must be positive, got {dt}")));
    }
    let mut prop = TangentPropagator::new(frame.clone());
    for s in 0..steps {
        let j = jacobian_at(s)?;
        if !j.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!("non-finite Jacobian at step {s} of interval {}", frame.interval)));
        }
        prop.step(&j, dt);
    }
    let r = prop.close_interval()?;
    Ok((prop.frame, r))
}

/// Householder QR with the sign convention `R_qq > 0`.
pub(crate) fn qr_positive(m: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for c in 0..r.nrows() {
        let diag = r[(c, c)];
        if diag == 0.0 || !diag.is_finite() {
            return Err(Error::numerical(format!("singular tangent frame: R[{c},{c}] = {diag}")));
        }
        if diag < 0.0 {
            q.column_mut(c).neg_mut();
            r.row_mut(c).neg_mut();
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_jacobian_leaves_frame_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = TangentFrame::random(5, &mut rng);
        let (next, r) = propagate_interval(&frame, |_| Ok(DMatrix::zeros(5, 5)), 0.1, 20).unwrap();
        assert!((next.q - &frame.q).amax() < 1e-14);
        assert!((r - DMatrix::<f64>::identity(5, 5)).amax() < 1e-14);
        assert_eq!(next.interval, 1);
    }

    #[test]
    fn frozen_diagonal_single_step() {
        let j = DMatrix::from_diagonal_element(9, 9, -2.0);
        let (_, r) = propagate_interval(&TangentFrame::identity(9), |_| Ok(j.clone()), 0.00003, 1).unwrap();
        for q in 0..9 {
            assert!((r[(q, q)] - (1.0 - 0.00006)).abs() < 1e-15);
        }
    }

    #[test]
    fn positive_diagonal_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut frame = TangentFrame::random(9, &mut rng);
        for _ in 0..50 {
            let j = DMatrix::from_fn(9, 9, |_, _| rng.random_range(-5.0..5.0));
            let (next, r) = propagate_interval(&frame, |_| Ok(j.clone()), 0.01, 20).unwrap();
            assert!((0..9).all(|q| r[(q, q)] > 0.0));
            for row in 1..9 {
                for col in 0..row {
                    assert_eq!(r[(row, col)], 0.0);
                }
            }
            assert!(next.orthonormality_defect() < 1e-10);
            frame = next;
        }
    }

    #[test]
    fn volume_identity_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = TangentFrame::random(6, &mut rng);
        let js: Vec<DMatrix<f64>> = (0..20).map(|_| DMatrix::from_fn(6, 6, |_, _| rng.random_range(-3.0..3.0))).collect();
        let dt = 0.003;
        let (_, r) = propagate_interval(&frame, |s| Ok(js[s].clone()), dt, js.len()).unwrap();
        let log_r: f64 = (0..6).map(|q| r[(q, q)].ln()).sum();
        let log_det: f64 = js
            .iter()
            .map(|j| (DMatrix::<f64>::identity(6, 6) + j * dt).determinant().abs().ln())
            .sum();
        assert!((log_r - log_det).abs() < 1e-10, "{log_r} vs {log_det}");
    }

    #[test]
    fn non_finite_jacobian_aborts() {
        let mut j = DMatrix::zeros(3, 3);
        j[(1, 2)] = f64::NAN;
        let err = propagate_interval(&TangentFrame::identity(3), |_| Ok(j.clone()), 0.1, 2).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn singular_map_is_reported() {
        // dt·J = −I collapses every direction
        let j = DMatrix::from_diagonal_element(3, 3, -10.0);
        let err = propagate_interval(&TangentFrame::identity(3), |_| Ok(j.clone()), 0.1, 1).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
