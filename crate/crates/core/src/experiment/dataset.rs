use rand_distr::{Distribution, StandardNormal};

use super::seeding::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::net::Batch;

/// The regression target `y = 10·x1 − 2·x2²`.
#[inline]
pub fn regression_target(x1: f64, x2: f64) -> f64 {
    10.0 * x1 - 2.0 * x2 * x2
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn from_features(x: Vec<[f64; 2]>, seed: u64) -> Self {
        let y = x.iter().map(|r| regression_target(r[0], r[1])).collect();
        Dataset { x, y, seed }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn to_batch(&self) -> Batch {
        let mut b = Batch::with_capacity(2, 1, self.len());
        for (x, y) in self.x.iter().zip(&self.y) {
            b.push(x, std::slice::from_ref(y));
        }
        b
    }

    /// Overwrites `out` with the rows at `indices`.
    pub fn gather(&self, indices: &[usize], out: &mut Batch) {
        out.clear();
        for &i in indices {
            out.push(&self.x[i], std::slice::from_ref(&self.y[i]));
        }
    }
}

/// `n` rows with `x1, x2 ~ N(0, 1)` drawn from the data stream of `seed`.
pub fn generate_dataset(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("dataset needs at least one observation"));
    }
    let mut rng = stream_rng(seed, Stream::Data);
    let x = (0..n)
        .map(|_| {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let x2: f64 = StandardNormal.sample(&mut rng);
            [x1, x2]
        })
        .collect();
    Ok(Dataset::from_features(x, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_formula() {
        assert_eq!(regression_target(1.0, 0.0), 10.0);
        assert_eq!(regression_target(0.0, 1.0), -2.0);
    }

    #[test]
    fn targets_follow_formula_exactly() {
        let d = generate_dataset(200, 4).unwrap();
        for (x, y) in d.x.iter().zip(&d.y) {
            assert_eq!(*y, 10.0 * x[0] - 2.0 * x[1] * x[1]);
        }
    }

    #[test]
    fn feature_moments() {
        let d = generate_dataset(1000, 7).unwrap();
        for f in 0..2 {
            let mean = d.x.iter().map(|r| r[f]).sum::<f64>() / 1000.0;
            let var = d.x.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / 999.0;
            assert!(mean.abs() < 0.12, "feature {f} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 0.12, "feature {f} std {}", var.sqrt());
        }
    }

    #[test]
    fn seeded_and_nonempty() {
        assert_eq!(generate_dataset(10, 1).unwrap(), generate_dataset(10, 1).unwrap());
        assert_ne!(generate_dataset(10, 1).unwrap().x, generate_dataset(10, 2).unwrap().x);
        assert!(generate_dataset(0, 1).is_err());
    }
}
