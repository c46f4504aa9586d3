//! Bijection between [`Params`] and the flat state vector.
//!
//! Layout: consecutive columns of `W21`, then of `W32`, then `b1`, then `b2`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::net::{Activation, Dims, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateIndexMap {
    dims: Dims,
}

impl StateIndexMap {
    pub fn new(dims: Dims) -> Self {
        StateIndexMap { dims }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.state_dim()
    }

    #[inline]
    pub fn w21(&self, j: usize, i: usize) -> usize {
        i * self.dims.n2 + j
    }

    #[inline]
    pub fn w32(&self, k: usize, j: usize) -> usize {
        self.w32_offset() + j * self.dims.n3 + k
    }

    #[inline]
    pub fn b1(&self, j: usize) -> usize {
        self.b1_offset() + j
    }

    #[inline]
    pub fn b2(&self, k: usize) -> usize {
        self.b2_offset() + k
    }

    pub fn w32_offset(&self) -> usize {
        self.dims.n1 * self.dims.n2
    }

    pub fn b1_offset(&self) -> usize {
        self.w32_offset() + self.dims.n2 * self.dims.n3
    }

    pub fn b2_offset(&self) -> usize {
        self.b1_offset() + self.dims.n2
    }

    /// Human-readable name of a state coordinate, e.g. `W21[1,0]`.
    pub fn label(&self, index: usize) -> String {
        let Dims { n2, n3, .. } = self.dims;
        if index < self.w32_offset() {
            format!("W21[{},{}]", index % n2, index / n2)
        } else if index < self.b1_offset() {
            let r = index - self.w32_offset();
            format!("W32[{},{}]", r % n3, r / n3)
        } else if index < self.b2_offset() {
            format!("b1[{}]", index - self.b1_offset())
        } else {
            format!("b2[{}]", index - self.b2_offset())
        }
    }
}

pub fn flatten(params: &Params) -> DVector<f64> {
    let map = StateIndexMap::new(params.dims());
    let mut v = DVector::zeros(map.dim());
    let Dims { n1, n2, n3 } = map.dims();
    for i in 0..n1 {
        for j in 0..n2 {
            v[map.w21(j, i)] = params.w21[(j, i)];
        }
    }
    for j in 0..n2 {
        for k in 0..n3 {
            v[map.w32(k, j)] = params.w32[(k, j)];
        }
    }
    for j in 0..n2 {
        v[map.b1(j)] = params.b1[j];
    }
    for k in 0..n3 {
        v[map.b2(k)] = params.b2[k];
    }
    v
}

pub fn unflatten(state: &DVector<f64>, dims: Dims, activation: Activation) -> Result<Params> {
    dims.validate()?;
    let map = StateIndexMap::new(dims);
    if state.len() != map.dim() {
        return Err(Error::input(format!(
            "state vector has length {}, dims {:?} need {}",
            state.len(),
            dims,
            map.dim()
        )));
    }
    let mut p = Params::zeros(dims, activation);
    for i in 0..dims.n1 {
        for j in 0..dims.n2 {
            p.w21[(j, i)] = state[map.w21(j, i)];
        }
    }
    for j in 0..dims.n2 {
        for k in 0..dims.n3 {
            p.w32[(k, j)] = state[map.w32(k, j)];
        }
        p.b1[j] = state[map.b1(j)];
    }
    for k in 0..dims.n3 {
        p.b2[k] = state[map.b2(k)];
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_of_two_two_one_network() {
        let map = StateIndexMap::new(Dims::new(2, 2, 1));
        assert_eq!(map.dim(), 9);
        assert_eq!(map.w21(0, 0), 0);
        assert_eq!(map.w21(1, 0), 1);
        assert_eq!(map.w21(0, 1), 2);
        assert_eq!(map.w32(0, 0), 4);
        assert_eq!(map.w32(0, 1), 5);
        assert_eq!(map.b1(0), 6);
        assert_eq!(map.b2(0), 8);
        assert_eq!(map.label(5), "W32[0,1]");
    }

    #[test]
    fn index_map_is_a_bijection() {
        for (n1, n2, n3) in [(2, 2, 1), (3, 4, 2), (1, 1, 1), (5, 2, 3)] {
            let map = StateIndexMap::new(Dims::new(n1, n2, n3));
            let mut seen = vec![false; map.dim()];
            let mut mark = |idx: usize| {
                assert!(!seen[idx], "index {idx} hit twice");
                seen[idx] = true;
            };
            for i in 0..n1 {
                for j in 0..n2 {
                    mark(map.w21(j, i));
                }
            }
            for j in 0..n2 {
                for k in 0..n3 {
                    mark(map.w32(k, j));
                }
                mark(map.b1(j));
            }
            for k in 0..n3 {
                mark(map.b2(k));
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let v = DVector::zeros(8);
        assert!(matches!(unflatten(&v, Dims::new(2, 2, 1), Activation::Tanh), Err(Error::Input(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(n1 in 1usize..4, n2 in 1usize..5, n3 in 1usize..3, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dims = Dims::new(n1, n2, n3);
            let mut p = Params::zeros(dims, Activation::Gelu);
            for v in p.w21.iter_mut().chain(p.w32.iter_mut()).chain(p.b1.iter_mut()).chain(p.b2.iter_mut()) {
                *v = rng.random_range(-1e3..1e3);
            }
            let back = unflatten(&flatten(&p), dims, Activation::Gelu).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
