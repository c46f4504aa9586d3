use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::OutcomeTable;

/// Side of the threshold that counts as the positive outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `c_f < threshold`
    Below,
    /// `c_f > threshold`
    Above,
}

impl Direction {
    pub fn is_positive(self, c_f: f64, threshold: f64) -> bool {
        match self {
            Direction::Below => c_f < threshold,
            Direction::Above => c_f > threshold,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Below => "below",
            Direction::Above => "above",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "below" => Ok(Direction::Below),
            "above" => Ok(Direction::Above),
            _ => Err(Error::input(format!("unknown direction {s:?} (expected below or above)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Even run ids train, odd ones test.
    pub fn of_run(run_id: u64) -> Split {
        if run_id % 2 == 0 {
            Split::Train
        } else {
            Split::Test
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRow {
    pub run_id: u64,
    pub features: Vec<f64>,
    pub positive: bool,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatures {
    pub names: Vec<String>,
    pub rows: Vec<LabeledRow>,
    /// Runs skipped because a selected feature was not finite.
    pub dropped: usize,
}

impl LabeledFeatures {
    pub fn train(&self) -> impl Iterator<Item = &LabeledRow> {
        self.rows.iter().filter(|r| r.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &LabeledRow> {
        self.rows.iter().filter(|r| r.split == Split::Test)
    }
}

/// Table columns behind a feature selector at one checkpoint.
///
/// Selectors: `ftle` (all exponents), `ftle{q}`, `meancos`, `loss`, `cos{i}_{j}`.
pub fn feature_columns(table: &OutcomeTable, feature: &str, checkpoint: usize) -> Result<Vec<String>> {
    let cols = if feature == "ftle" {
        (1..=table.state_dim()).map(|q| format!("ftle{q}_ck{checkpoint}")).collect()
    } else {
        vec![format!("{feature}_ck{checkpoint}")]
    };
    for c in &cols {
        if table.column(c).is_none() {
            return Err(Error::input(format!(
                "feature {feature:?} at checkpoint {checkpoint} not in outcome table (missing column {c})"
            )));
        }
    }
    if cols.is_empty() {
        return Err(Error::input("outcome table has no exponent columns"));
    }
    Ok(cols)
}

/// Labels every run by its final loss and attaches the selected feature columns.
///
/// Runs whose selected features are not all finite are dropped and counted. Diverged runs
/// (`c_f = +inf`) label like any other very large loss.
pub fn label_outcomes(
    table: &OutcomeTable,
    threshold: f64,
    direction: Direction,
    columns: &[String],
) -> Result<LabeledFeatures> {
    if !threshold.is_finite() {
        return Err(Error::input(format!("threshold must be finite, got {threshold}")));
    }
    let idx = columns
        .iter()
        .map(|c| table.column(c).ok_or_else(|| Error::input(format!("no column {c:?} in outcome table"))))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(table.len());
    let mut dropped = 0;
    for r in &table.rows {
        let features: Vec<f64> = idx.iter().map(|&i| r.features[i]).collect();
        if features.iter().any(|v| !v.is_finite()) || r.c_f.is_nan() {
            dropped += 1;
            continue;
        }
        rows.push(LabeledRow {
            run_id: r.run_id,
            features,
            positive: direction.is_positive(r.c_f, threshold),
            split: Split::of_run(r.run_id),
        });
    }
    let data = LabeledFeatures { names: columns.to_vec(), rows, dropped };
    let pos = data.train().filter(|r| r.positive).count();
    let neg = data.train().count() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::config(format!(
            "training split needs both classes (c_f {direction} {threshold}: {pos} positive, {neg} negative)"
        )));
    }
    Ok(data)
}
