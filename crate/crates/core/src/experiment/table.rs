use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::config::TrainConfig;
use super::train::RunRecord;
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 5] = ["run_id", "seed", "activation", "init", "c_f"];

/// One row per run.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRow {
    pub run_id: u64,
    pub seed: u64,
    pub activation: String,
    pub init: String,
    pub c_f: f64,
    /// Values of [`OutcomeTable::columns`], in order.
    pub features: Vec<f64>,
}

/// Ensemble outcomes flattened to one row per run.
///
/// Feature columns, all per checkpoint `c`: `ftle{q}_ck{c}` and `meancos_ck{c}`, then
/// `loss_ck{c}`, then `cos{i}_{j}_ck{c}` for `i < j`, and finally the whole-run
/// exponents `l{q}`. Indices `q, i, j` count from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub columns: Vec<String>,
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeTable {
    pub fn feature_columns(dim: usize, checkpoints: &[usize]) -> Vec<String> {
        let mut cols = Vec::new();
        for c in checkpoints {
            cols.extend((1..=dim).map(|q| format!("ftle{q}_ck{c}")));
            cols.push(format!("meancos_ck{c}"));
        }
        cols.extend(checkpoints.iter().map(|c| format!("loss_ck{c}")));
        for c in checkpoints {
            for i in 1..=dim {
                for j in (i + 1)..=dim {
                    cols.push(format!("cos{i}_{j}_ck{c}"));
                }
            }
        }
        cols.extend((1..=dim).map(|q| format!("l{q}")));
        cols
    }

    /// Builds the table from run records of one ensemble; rows are sorted by run id.
    pub fn from_records(config: &TrainConfig, records: &[RunRecord]) -> Result<OutcomeTable> {
        let dim = config.dims.state_dim();
        let checkpoints = config.checkpoint_intervals();
        let columns = Self::feature_columns(dim, &checkpoints);
        let mut rows = Vec::with_capacity(records.len());
        for rec in records {
            if rec.checkpoints.len() != checkpoints.len() || rec.spectrum.len() != dim {
                return Err(Error::input(format!("run {} does not match the table schema", rec.run_id)));
            }
            let mut f = Vec::with_capacity(columns.len());
            for ck in &rec.checkpoints {
                f.extend_from_slice(&ck.ftle);
                f.push(ck.mean_cos_abs);
            }
            f.extend(rec.checkpoints.iter().map(|ck| ck.loss));
            for ck in &rec.checkpoints {
                for i in 0..dim {
                    for j in (i + 1)..dim {
                        f.push(ck.cos_abs[i][j]);
                    }
                }
            }
            f.extend_from_slice(&rec.spectrum);
            rows.push(OutcomeRow {
                run_id: rec.run_id,
                seed: rec.seed,
                activation: config.activation.name().to_string(),
                init: config.initializer.name().to_string(),
                c_f: rec.c_f,
                features: f,
            });
        }
        let table = OutcomeTable { columns, rows };
        table.sorted()
    }

    fn sorted(mut self) -> Result<OutcomeTable> {
        self.rows.sort_by_key(|r| r.run_id);
        let mut seen = HashSet::new();
        if let Some(dup) = self.rows.iter().find(|r| !seen.insert(r.run_id)) {
            return Err(Error::input(format!("duplicate run_id {}", dup.run_id)));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one feature column across runs.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column(name).ok_or_else(|| Error::input(format!("no column {name:?} in outcome table")))?;
        Ok(self.rows.iter().map(|r| r.features[idx]).collect())
    }

    /// Checkpoints present in the schema, read from the `meancos_ck{c}` columns.
    pub fn checkpoints(&self) -> Vec<usize> {
        self.columns.iter().filter_map(|c| c.strip_prefix("meancos_ck")?.parse().ok()).collect()
    }

    /// Tangent dimension, read from the `l{q}` columns.
    pub fn state_dim(&self) -> usize {
        self.columns.iter().filter(|c| c.strip_prefix('l').is_some_and(|q| q.parse::<usize>().is_ok())).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FIXED_COLUMNS.iter().copied().chain(self.columns.iter().map(String::as_str)))?;
        for r in &self.rows {
            let mut fields = vec![
                r.run_id.to_string(),
                r.seed.to_string(),
                r.activation.clone(),
                r.init.clone(),
                r.c_f.to_string(),
            ];
            fields.extend(r.features.iter().map(f64::to_string));
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<OutcomeTable> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
            return Err(Error::input(format!("outcome table must start with {}", FIXED_COLUMNS.join(","))));
        }
        let columns = header[FIXED_COLUMNS.len()..].to_vec();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| Error::input(format!("bad number {:?} in column {}", &rec[i], header[i])))
            };
            let int = |i: usize| -> Result<u64> {
                rec[i].parse().map_err(|_| Error::input(format!("bad integer {:?} in column {}", &rec[i], header[i])))
            };
            rows.push(OutcomeRow {
                run_id: int(0)?,
                seed: int(1)?,
                activation: rec[2].to_string(),
                init: rec[3].to_string(),
                c_f: num(4)?,
                features: (FIXED_COLUMNS.len()..header.len()).map(num).collect::<Result<_>>()?,
            });
        }
        OutcomeTable { columns, rows }.sorted()
    }

    pub fn read_csv_file(path: &Path) -> Result<OutcomeTable> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
