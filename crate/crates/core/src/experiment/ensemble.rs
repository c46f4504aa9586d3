use rayon::prelude::*;

use super::config::TrainConfig;
use super::dataset::{generate_dataset, Dataset};
use super::table::OutcomeTable;
use super::train::{train_run, RunRecord};
use crate::error::{Error, Result};

/// Trains `n_runs` networks on one shared dataset; run `r` uses the seeds of
/// [`Seeds::for_run`](super::Seeds::for_run). Records come back ordered by run id and do
/// not depend on `parallelism`.
pub fn run_ensemble_records(
    config: &TrainConfig,
    dataset: &Dataset,
    n_runs: usize,
    parallelism: usize,
) -> Result<Vec<RunRecord>> {
    if n_runs == 0 {
        return Err(Error::config("an ensemble needs at least one run"));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|run_id| {
                let run = TrainConfig { seeds: config.seeds.for_run(run_id), ..config.clone() };
                train_run(&run, dataset, run_id)
            })
            .collect()
    })
}

/// Generates the dataset from the data seed, runs the ensemble and tabulates it.
pub fn run_ensemble(config: &TrainConfig, n_runs: usize, parallelism: usize) -> Result<OutcomeTable> {
    let dataset = generate_dataset(config.n_samples, config.seeds.data)?;
    let records = run_ensemble_records(config, &dataset, n_runs, parallelism)?;
    OutcomeTable::from_records(config, &records)
}
