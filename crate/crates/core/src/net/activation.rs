use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Gelu,
}

/// `σ(x)`, `σ'(x)` and `σ''(x)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Gelu];

    #[inline]
    pub fn eval(self, x: f64) -> ActivationValue {
        match self {
            Activation::Relu => {
                // subgradient at the kink is 0; the distributional σ'' is dropped
                if x > 0.0 {
                    ActivationValue { value: x, first: 1.0, second: 0.0 }
                } else {
                    ActivationValue { value: 0.0, first: 0.0, second: 0.0 }
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                let sech2 = 1.0 - t * t;
                ActivationValue { value: t, first: sech2, second: -2.0 * t * sech2 }
            }
            Activation::Gelu => {
                // exact erf form, not the tanh approximation
                let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                ActivationValue {
                    value: x * cdf,
                    first: cdf + x * pdf,
                    second: 2.0 * pdf - x * (x * pdf),
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Gelu => "gelu",
        }
    }
}

/// Tuple form of [`Activation::eval`].
pub fn activation_eval(kind: Activation, x: f64) -> (f64, f64, f64) {
    let v = kind.eval(x);
    (v.value, v.first, v.second)
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::input(format!("unknown activation '{other}'"))),
        }
    }
}
