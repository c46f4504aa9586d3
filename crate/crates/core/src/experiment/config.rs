use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::init::Initializer;
use crate::error::{Error, Result};
use crate::net::{Activation, Dims};

/// Checkpoints (in orthogonalization intervals) used when none are configured.
pub const DEFAULT_CHECKPOINTS: [usize; 4] = [500, 1000, 2000, 3000];

/// Seeds of the independent random streams of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
    pub batch_order: u64,
    pub ginelli: u64,
}

impl Seeds {
    /// All four seeds set to `seed`.
    pub fn uniform(seed: u64) -> Self {
        Seeds { data: seed, init: seed, batch_order: seed, ginelli: seed }
    }

    /// Seeds of ensemble member `run_id`: the data seed is shared, the others are offset.
    pub fn for_run(&self, run_id: u64) -> Self {
        Seeds {
            data: self.data,
            init: self.init.wrapping_add(run_id),
            batch_order: self.batch_order.wrapping_add(run_id),
            ginelli: self.ginelli.wrapping_add(run_id),
        }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dims: Dims,
    pub activation: Activation,
    pub initializer: Initializer,
    /// Integration step (learning rate).
    pub dt: f64,
    pub steps_per_interval: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    /// Number of observations in the generated dataset.
    pub n_samples: usize,
    pub clv_window_intervals: usize,
    /// Checkpoint interval indices. `None` selects the entries of
    /// [`DEFAULT_CHECKPOINTS`] that fit into the run.
    pub checkpoints: Option<Vec<usize>>,
    pub seeds: Seeds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: Dims::default(),
            activation: Activation::Relu,
            initializer: Initializer::He,
            dt: 0.00003,
            steps_per_interval: 20,
            total_steps: 40_000,
            batch_size: 32,
            n_samples: 1000,
            clv_window_intervals: 10,
            checkpoints: None,
            seeds: Seeds::default(),
        }
    }
}

impl TrainConfig {
    pub fn n_intervals(&self) -> usize {
        self.total_steps / self.steps_per_interval.max(1)
    }

    /// Orthogonalization interval length `dτ` in time units.
    pub fn interval_length(&self) -> f64 {
        self.dt * self.steps_per_interval as f64
    }

    pub fn checkpoint_intervals(&self) -> Vec<usize> {
        match &self.checkpoints {
            Some(c) => c.clone(),
            None => DEFAULT_CHECKPOINTS
                .iter()
                .copied()
                .filter(|&c| c <= self.n_intervals() && c >= self.clv_window_intervals)
                .collect(),
        }
    }

    /// The same configuration with the default checkpoint list made explicit.
    pub fn resolved(&self) -> TrainConfig {
        TrainConfig { checkpoints: Some(self.checkpoint_intervals()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if let Initializer::Wide { sigma } = self.initializer {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::config(format!("wide-range sigma must be positive, got {sigma}")));
            }
        }
        if self.steps_per_interval == 0 {
            return Err(Error::config("steps_per_interval must be positive"));
        }
        if self.total_steps == 0 || self.total_steps % self.steps_per_interval != 0 {
            return Err(Error::config(format!(
                "total_steps ({}) must be a positive multiple of steps_per_interval ({})",
                self.total_steps, self.steps_per_interval
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be positive"));
        }
        if self.clv_window_intervals == 0 {
            return Err(Error::config("clv_window_intervals must be positive"));
        }
        let checkpoints = self.checkpoint_intervals();
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!("checkpoints must be strictly increasing, got {checkpoints:?}")));
        }
        for &c in &checkpoints {
            if c < self.clv_window_intervals || c > self.n_intervals() {
                return Err(Error::config(format!(
                    "checkpoint {c} outside {}..={} (CLV window to run length in intervals)",
                    self.clv_window_intervals,
                    self.n_intervals()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.resolved()).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_drop_unreachable_checkpoints() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_intervals(), 2000);
        assert_eq!(c.checkpoint_intervals(), vec![500, 1000, 2000]);
        let long = TrainConfig { total_steps: 60_000, ..c };
        assert_eq!(long.checkpoint_intervals(), vec![500, 1000, 2000, 3000]);
        assert!((long.interval_length() - 0.0006).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::default();
        for bad in [
            TrainConfig { total_steps: 40_010, ..base.clone() },
            TrainConfig { dt: 0.0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { checkpoints: Some(vec![3000]), ..base.clone() },
            TrainConfig { checkpoints: Some(vec![5]), ..base.clone() },
            TrainConfig { checkpoints: Some(vec![1000, 500]), ..base.clone() },
            TrainConfig { initializer: Initializer::Wide { sigma: -1.0 }, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = TrainConfig { initializer: Initializer::Wide { sigma: 20.0 }, ..TrainConfig::default() };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"learning_rate": 0.1}"#).is_err());
        let partial: TrainConfig = serde_json::from_str(r#"{"activation": "tanh"}"#).unwrap();
        assert_eq!(partial.activation, Activation::Tanh);
        assert_eq!(partial.total_steps, 40_000);
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        assert_eq!(a.hash(), a.clone().hash());
        assert_eq!(a.hash(), a.resolved().hash());
        let b = TrainConfig { seeds: Seeds::uniform(1), ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn run_seeds_share_data() {
        let s = Seeds { data: 7, init: 10, batch_order: 20, ginelli: 30 }.for_run(3);
        assert_eq!(s, Seeds { data: 7, init: 13, batch_order: 23, ginelli: 33 });
    }
}
