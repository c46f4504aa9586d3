use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::persist::{non_finite_f64, non_finite_matrix, non_finite_vec};
use super::seeding::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::jacobian::accumulate_analytic;
use crate::net::{cost, vector_field, Batch, Params};
use crate::stability::{
    clv_angles, estimate_clvs_online, ftle_from_log_diagonals, ginelli_clvs, log_diagonal, AngleStats, RSequence, TangentFrame,
    TangentPropagator,
};

/// Share of the run's intervals that the Ginelli backward pass spends converging.
pub const GINELLI_TAIL_FRACTION: f64 = 0.2;

/// Batches per epoch when the last, partial batch is kept.
pub fn steps_per_epoch(n_samples: usize, batch_size: usize) -> usize {
    n_samples.div_ceil(batch_size)
}

/// Epochs covered by `steps` integration steps (the last one possibly incomplete).
pub fn epochs_for_steps(steps: usize, n_samples: usize, batch_size: usize) -> usize {
    steps.div_ceil(steps_per_epoch(n_samples, batch_size))
}

/// State handed to a [`TrainObserver`] after each integration step.
pub struct StepEvent<'a> {
    pub step: usize,
    pub before: &'a Params,
    pub after: &'a Params,
    pub batch: &'a Batch,
    /// Jacobian at `before` on `batch`, the matrix the tangent step used.
    pub jacobian: &'a DMatrix<f64>,
}

/// Hooks into the training loop, used by diagnostics and tests.
pub trait TrainObserver {
    fn on_step(&mut self, _event: &StepEvent<'_>) {}

    /// Called when interval `interval` closes; `start` is its initial frame.
    fn on_interval(&mut self, _interval: usize, _start: &TangentFrame, _r: &DMatrix<f64>) {}
}

impl TrainObserver for () {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub interval: usize,
    /// FTLEs over the intervals since the previous checkpoint.
    #[serde(with = "non_finite_vec")]
    pub ftle: Vec<f64>,
    /// Angle statistics of the online CLV estimate.
    #[serde(with = "non_finite_f64")]
    pub mean_cos_abs: f64,
    #[serde(with = "non_finite_matrix")]
    pub cos_abs: Vec<Vec<f64>>,
    /// Cost over the full dataset.
    #[serde(with = "non_finite_f64")]
    pub loss: f64,
}

impl CheckpointRecord {
    fn missing(interval: usize, dim: usize) -> Self {
        CheckpointRecord {
            interval,
            ftle: vec![f64::NAN; dim],
            mean_cos_abs: f64::NAN,
            cos_abs: vec![vec![f64::NAN; dim]; dim],
            loss: f64::NAN,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.loss.is_finite() && self.mean_cos_abs.is_finite() && self.ftle.iter().all(|v| v.is_finite())
    }
}

/// Angle statistics of the Ginelli vectors at the last emitted interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinelliSummary {
    pub interval: usize,
    pub mean_cos_abs: f64,
    pub cos_abs: Vec<Vec<f64>>,
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    /// Initialization seed of this run.
    pub seed: u64,
    pub config_hash: String,
    /// Final cost over the full dataset; `+inf` when the run diverged.
    #[serde(with = "non_finite_f64")]
    pub c_f: f64,
    pub diverged: bool,
    /// Whole-run Lyapunov spectrum.
    #[serde(with = "non_finite_vec")]
    pub spectrum: Vec<f64>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub ginelli: Option<GinelliSummary>,
    /// `ln R_qq` of every interval, persisted separately.
    #[serde(skip)]
    pub log_r: Vec<Vec<f64>>,
}

/// Tangent-space history of a run: frame at the start of each interval and its factor.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub frames: Vec<TangentFrame>,
    pub rs: RSequence,
    pub final_params: Params,
}

/// Trains one network and records its stability indicators.
pub fn train_run(config: &TrainConfig, dataset: &Dataset, run_id: u64) -> Result<RunRecord> {
    Ok(train_run_observed(config, dataset, run_id, &mut ())?.0)
}

/// [`train_run`] with an observer, also returning the tangent-space history.
pub fn train_run_observed(
    config: &TrainConfig,
    dataset: &Dataset,
    run_id: u64,
    observer: &mut dyn TrainObserver,
) -> Result<(RunRecord, Trajectory)> {
    config.validate()?;
    if config.dims.n1 != 2 || config.dims.n3 != 1 {
        return Err(Error::config("the regression task needs 2 inputs and 1 output"));
    }
    if dataset.is_empty() {
        return Err(Error::input("dataset is empty"));
    }
    let dims = config.dims;
    let dim = dims.state_dim();
    let n = dataset.len();
    let full = dataset.to_batch();
    let checkpoints = config.checkpoint_intervals();
    let window = config.clv_window_intervals;
    let spi = config.steps_per_interval;
    let spe = steps_per_epoch(n, config.batch_size);

    let mut params = config.initializer.init(dims, config.activation, config.seeds.init)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut order_rng = stream_rng(config.seeds.batch_order, Stream::BatchOrder);
    let mut prop = TangentPropagator::new(TangentFrame::random(dim, &mut stream_rng(config.seeds.init, Stream::Tangent)));

    let mut frames: Vec<TangentFrame> = Vec::with_capacity(config.n_intervals());
    let mut rs = RSequence::new(config.interval_length());
    let mut log_r: Vec<Vec<f64>> = Vec::with_capacity(config.n_intervals());
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut next_ck = 0;
    let mut batch = Batch::with_capacity(dims.n1, dims.n3, config.batch_size);
    let mut jac = DMatrix::zeros(dim, dim);
    let mut diverged = false;

    for step in 0..config.total_steps {
        let pos = step % spe;
        if pos == 0 {
            order.shuffle(&mut order_rng);
        }
        let lo = pos * config.batch_size;
        dataset.gather(&order[lo..(lo + config.batch_size).min(n)], &mut batch);

        if prop.steps_in_interval() == 0 {
            frames.push(prop.frame().clone());
        }
        let velocity = vector_field(&params, &batch)?;
        accumulate_analytic(&params, &batch, &mut jac);
        if !velocity.is_finite() || jac.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        prop.step(&jac, config.dt);
        let mut next = params.clone();
        next.axpy(config.dt, &velocity);
        observer.on_step(&StepEvent { step, before: &params, after: &next, batch: &batch, jacobian: &jac });
        params = next;
        if !params.is_finite() {
            diverged = true;
            break;
        }

        if prop.steps_in_interval() == spi {
            let r = match prop.close_interval() {
                Ok(r) => r,
                Err(_) => {
                    diverged = true;
                    break;
                }
            };
            let k = rs.len();
            observer.on_interval(k, &frames[k], &r);
            log_r.push(log_diagonal(&r));
            rs.push(r);
            let done = rs.len();
            if next_ck < checkpoints.len() && checkpoints[next_ck] == done {
                let since = if next_ck == 0 { 0 } else { checkpoints[next_ck - 1] };
                let ftle = ftle_from_log_diagonals(&log_r[since..done], rs.interval_length)?;
                let loss = cost(&params, &full)?;
                let angles =
                    estimate_clvs_online(&frames[done - window..done], &rs.factors[done - window..done], window)
                        .map(|v| clv_angles(&v));
                let record = match angles {
                    Ok(a) => CheckpointRecord {
                        interval: done,
                        ftle,
                        mean_cos_abs: a.mean_cos_abs,
                        cos_abs: matrix_rows(&a),
                        loss,
                    },
                    Err(_) => CheckpointRecord { ftle, loss, ..CheckpointRecord::missing(done, dim) },
                };
                records.push(record);
                next_ck += 1;
            }
        }
    }
    frames.truncate(rs.len());
    while records.len() < checkpoints.len() {
        records.push(CheckpointRecord::missing(checkpoints[records.len()], dim));
    }

    let c_f = if diverged { f64::INFINITY } else { cost(&params, &full)? };
    let (c_f, diverged) = if c_f.is_finite() { (c_f, false) } else { (f64::INFINITY, true) };
    let spectrum = if rs.is_empty() {
        vec![f64::NAN; dim]
    } else {
        ftle_from_log_diagonals(&log_r, rs.interval_length)?
    };
    let ginelli = if diverged || rs.len() < 2 { None } else { ginelli_summary(&frames, &rs, config.seeds.ginelli) };

    let record = RunRecord {
        run_id,
        seed: config.seeds.init,
        config_hash: config.hash(),
        c_f,
        diverged,
        spectrum,
        checkpoints: records,
        ginelli,
        log_r,
    };
    Ok((record, Trajectory { frames, rs, final_params: params }))
}

fn ginelli_summary(frames: &[TangentFrame], rs: &RSequence, seed: u64) -> Option<GinelliSummary> {
    let n = rs.len();
    let tail = ((n as f64 * GINELLI_TAIL_FRACTION).round() as usize).clamp(1, n - 1);
    let sets = ginelli_clvs(frames, rs, tail, seed).ok()?;
    let last = sets.last()?;
    let a = clv_angles(last);
    Some(GinelliSummary { interval: last.interval, mean_cos_abs: a.mean_cos_abs, cos_abs: matrix_rows(&a) })
}

fn matrix_rows(a: &AngleStats) -> Vec<Vec<f64>> {
    a.cos_abs.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{generate_dataset, Initializer, Seeds};
    use crate::net::Activation;

    fn small(activation: Activation) -> TrainConfig {
        TrainConfig {
            activation,
            total_steps: 2000,
            checkpoints: Some(vec![25, 50, 100]),
            seeds: Seeds::uniform(5),
            ..TrainConfig::default()
        }
    }

    struct Losses {
        full: Batch,
        values: Vec<f64>,
    }

    impl TrainObserver for Losses {
        fn on_step(&mut self, e: &StepEvent<'_>) {
            if self.values.is_empty() {
                self.values.push(cost(e.before, &self.full).unwrap());
            }
            self.values.push(cost(e.after, &self.full).unwrap());
        }
    }

    #[test]
    fn epoch_accounting() {
        assert_eq!(steps_per_epoch(1000, 32), 32);
        assert_eq!(steps_per_epoch(1000, 1000), 1);
        assert_eq!(epochs_for_steps(733_333, 1000, 32), 22_917);
        assert_eq!(epochs_for_steps(40_000, 1000, 32), 1250);
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let data = generate_dataset(200, 1).unwrap();
        let config = TrainConfig { batch_size: 200, n_samples: 200, ..small(Activation::Tanh) };
        let mut obs = Losses { full: data.to_batch(), values: Vec::new() };
        train_run_observed(&config, &data, 0, &mut obs).unwrap();
        assert_eq!(obs.values.len(), 2001);
        assert!(obs.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn duplicated_rows_leave_full_batch_trajectory_unchanged() {
        let data = generate_dataset(64, 2).unwrap();
        let mut doubled = data.clone();
        doubled.x.extend(data.x.clone());
        doubled.y.extend(data.y.clone());
        let a = TrainConfig { batch_size: 64, n_samples: 64, total_steps: 400, checkpoints: Some(vec![10]), ..small(Activation::Tanh) };
        let b = TrainConfig { batch_size: 128, n_samples: 128, ..a.clone() };
        let (_, ta) = train_run_observed(&a, &data, 0, &mut ()).unwrap();
        let (_, tb) = train_run_observed(&b, &doubled, 0, &mut ()).unwrap();
        let pa = crate::state::flatten(&ta.final_params);
        let pb = crate::state::flatten(&tb.final_params);
        assert!((pa - pb).amax() < 1e-12);
    }

    #[test]
    fn identical_inputs_give_identical_records() {
        let data = generate_dataset(100, 3).unwrap();
        let config = small(Activation::Relu);
        let a = train_run(&config, &data, 4).unwrap();
        let b = train_run(&config, &data, 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.log_r, b.log_r);
    }

    #[test]
    fn record_shape_and_offline_ftle_agreement() {
        let data = generate_dataset(100, 3).unwrap();
        let config = small(Activation::Gelu);
        let rec = train_run(&config, &data, 0).unwrap();
        assert!(!rec.diverged && rec.c_f >= 0.0 && rec.c_f.is_finite());
        assert_eq!(rec.spectrum.len(), 9);
        assert_eq!(rec.log_r.len(), 100);
        assert_eq!(rec.checkpoints.iter().map(|c| c.interval).collect::<Vec<_>>(), vec![25, 50, 100]);
        let bounds = [0, 25, 50, 100];
        for (ck, w) in rec.checkpoints.iter().zip(bounds.windows(2)) {
            assert!(ck.is_complete());
            let offline = ftle_from_log_diagonals(&rec.log_r[w[0]..w[1]], config.interval_length()).unwrap();
            assert_eq!(offline, ck.ftle);
            assert_eq!(ck.cos_abs.len(), 9);
            assert!(ck.cos_abs.iter().enumerate().all(|(i, row)| (row[i] - 1.0).abs() < 1e-12));
        }
        assert_eq!(ftle_from_log_diagonals(&rec.log_r, config.interval_length()).unwrap(), rec.spectrum);
        let g = rec.ginelli.as_ref().unwrap();
        assert_eq!(g.interval, 79);
        // the last checkpoint coincides with the end of the run
        assert_eq!(rec.checkpoints.last().unwrap().loss, rec.c_f);
    }

    #[test]
    fn json_record_round_trip() {
        let data = generate_dataset(50, 3).unwrap();
        let rec = train_run(&small(Activation::Tanh), &data, 9).unwrap();
        let text = serde_json::to_string(&rec).unwrap();
        for key in ["run_id", "c_f", "spectrum", "checkpoints", "interval", "ftle", "mean_cos_abs", "cos_abs", "loss"] {
            assert!(text.contains(&format!("\"{key}\"")), "{key}");
        }
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(RunRecord { log_r: rec.log_r.clone(), ..back }, rec);
    }

    #[test]
    fn divergence_is_recorded_not_raised() {
        let data = generate_dataset(50, 3).unwrap();
        let config = TrainConfig {
            initializer: Initializer::Wide { sigma: 20.0 },
            dt: 0.5,
            ..small(Activation::Relu)
        };
        let rec = train_run(&config, &data, 0).unwrap();
        assert!(rec.diverged);
        assert_eq!(rec.c_f, f64::INFINITY);
        assert_eq!(rec.checkpoints.len(), 3);
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"c_f\":\"inf\""));
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.c_f, f64::INFINITY);
    }
}
