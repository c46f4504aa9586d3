use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::seeding::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::net::{Activation, Dims, Params};

/// Default standard deviation of the wide-range initializer.
pub const DEFAULT_WIDE_SIGMA: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Initializer {
    He,
    Wide { sigma: f64 },
}

impl Initializer {
    pub fn name(&self) -> &'static str {
        match self {
            Initializer::He => "he",
            Initializer::Wide { .. } => "wide",
        }
    }

    pub fn init(&self, dims: Dims, activation: Activation, seed: u64) -> Result<Params> {
        match *self {
            Initializer::He => init_he(dims, activation, seed),
            Initializer::Wide { sigma } => init_wide(dims, activation, seed, sigma),
        }
    }
}

impl fmt::Display for Initializer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of each layer drawn from `N(0, 2/N_in)`; biases start at zero.
pub fn init_he(dims: Dims, activation: Activation, seed: u64) -> Result<Params> {
    dims.validate()?;
    let mut rng = stream_rng(seed, Stream::Init);
    let mut p = Params::zeros(dims, activation);
    fill(&mut rng, p.w21.iter_mut(), (2.0 / dims.n1 as f64).sqrt());
    fill(&mut rng, p.w32.iter_mut(), (2.0 / dims.n2 as f64).sqrt());
    Ok(p)
}

/// Every weight and bias drawn from `N(0, σ²)`.
pub fn init_wide(dims: Dims, activation: Activation, seed: u64, sigma: f64) -> Result<Params> {
    dims.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::input(format!("wide-range sigma must be positive, got {sigma}")));
    }
    let mut rng = stream_rng(seed, Stream::Init);
    let mut p = Params::zeros(dims, activation);
    fill(&mut rng, p.w21.iter_mut(), sigma);
    fill(&mut rng, p.w32.iter_mut(), sigma);
    fill(&mut rng, p.b1.iter_mut(), sigma);
    fill(&mut rng, p.b2.iter_mut(), sigma);
    Ok(p)
}

fn fill<'a>(rng: &mut impl Rng, values: impl Iterator<Item = &'a mut f64>, std: f64) {
    let normal = Normal::new(0.0, std).expect("std is positive and finite");
    for v in values {
        *v = normal.sample(rng);
    }
}
