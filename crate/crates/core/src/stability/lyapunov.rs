use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Upper-triangular factors of consecutive orthogonalization intervals.
///
/// Factor `k` maps the frame at the start of interval `k` to the frame at its end:
/// `M_k·Q_k = Q_{k+1}·R_k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RSequence {
    /// Interval length `dτ` in time units.
    pub interval_length: f64,
    pub factors: Vec<DMatrix<f64>>,
}

impl RSequence {
    pub fn new(interval_length: f64) -> Self {
        RSequence { interval_length, factors: Vec::new() }
    }

    pub fn push(&mut self, r: DMatrix<f64>) {
        self.factors.push(r);
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// `ln R_qq` of every factor.
    pub fn log_diagonals(&self) -> Vec<Vec<f64>> {
        self.factors.iter().map(log_diagonal).collect()
    }
}

pub(crate) fn log_diagonal(r: &DMatrix<f64>) -> Vec<f64> {
    (0..r.nrows()).map(|q| r[(q, q)].ln()).collect()
}

/// Finite-time Lyapunov exponents of a window of intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct FtleVector {
    pub exponents: Vec<f64>,
    /// First interval of the window.
    pub start: usize,
    /// One past the last interval of the window.
    pub end: usize,
}

impl FtleVector {
    pub fn duration(&self, interval_length: f64) -> f64 {
        (self.end - self.start) as f64 * interval_length
    }
}

/// `λ_q = Σ ln R_qq / (n·dτ)` over a window of log-diagonals.
///
/// This is the only place exponents are computed, so values recomputed from persisted
/// log-diagonals reproduce the recorded ones exactly.
pub fn ftle_from_log_diagonals(window: &[Vec<f64>], interval_length: f64) -> Result<Vec<f64>> {
    let first = window.first().ok_or_else(|| Error::input("FTLE window is empty"))?;
    let mut sums = vec![0.0; first.len()];
    for logs in window {
        if logs.len() != sums.len() {
            return Err(Error::input("FTLE window mixes tangent dimensions"));
        }
        for (s, l) in sums.iter_mut().zip(logs) {
            *s += l;
        }
    }
    let duration = window.len() as f64 * interval_length;
    Ok(sums.into_iter().map(|s| s / duration).collect())
}

/// FTLEs over `rs.factors[start..end]`.
pub fn ftle(rs: &RSequence, start: usize, end: usize) -> Result<FtleVector> {
    if start >= end || end > rs.len() {
        return Err(Error::input(format!("FTLE window {start}..{end} invalid for {} intervals", rs.len())));
    }
    let logs: Vec<Vec<f64>> = rs.factors[start..end].iter().map(log_diagonal).collect();
    Ok(FtleVector { exponents: ftle_from_log_diagonals(&logs, rs.interval_length)?, start, end })
}

/// Exponents averaged over the whole run, without discarding a transient.
pub fn lyapunov_spectrum(rs: &RSequence) -> Result<Vec<f64>> {
    Ok(ftle(rs, 0, rs.len())?.exponents)
}
