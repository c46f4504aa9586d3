//! Forecasting final-loss outcomes from stability indicators recorded early in training.

mod bayes;
mod labels;
mod roc;

pub use bayes::{fit_naive_bayes, predict_posterior, BayesModel, DEFAULT_BINS};
pub use labels::{feature_columns, label_outcomes, Direction, LabeledFeatures, LabeledRow, Split};
pub use roc::{contingency_table, roc_curve, Contingency, RocCurve};

use serde::Serialize;

use crate::error::Result;
use crate::experiment::OutcomeTable;

/// Test-split performance of one predictor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub feature: String,
    pub checkpoint: usize,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Runs left out because a selected feature was not finite.
    pub dropped: usize,
    #[serde(skip)]
    pub roc: RocCurve,
    #[serde(skip)]
    pub scores: Vec<f64>,
    #[serde(skip)]
    pub labels: Vec<bool>,
}

/// Labels the table, fits naive Bayes on the even run ids and scores the odd ones.
pub fn evaluate(
    table: &OutcomeTable,
    threshold: f64,
    direction: Direction,
    feature: &str,
    checkpoint: usize,
    bins: usize,
) -> Result<Evaluation> {
    let columns = feature_columns(table, feature, checkpoint)?;
    let data = label_outcomes(table, threshold, direction, &columns)?;
    let model = fit_naive_bayes(&data, bins)?;
    let test: Vec<&LabeledRow> = data.test().collect();
    let scores = test.iter().map(|r| predict_posterior(&model, &r.features)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = test.iter().map(|r| r.positive).collect();
    let roc = roc_curve(&scores, &labels)?;
    Ok(Evaluation {
        feature: feature.to_string(),
        checkpoint,
        auc: roc.auc,
        n_pos: roc.n_pos,
        n_neg: roc.n_neg,
        dropped: data.dropped,
        roc,
        scores,
        labels,
    })
}

/// One row of an AUC matrix; `auc` is `None` where the predictor is undefined
/// (for example a split without both classes).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AucEntry {
    pub feature: String,
    pub checkpoint: usize,
    pub auc: Option<f64>,
}

/// Test AUC of every feature at every checkpoint.
pub fn auc_matrix(
    table: &OutcomeTable,
    threshold: f64,
    direction: Direction,
    features: &[String],
    bins: usize,
) -> Vec<AucEntry> {
    let mut out = Vec::new();
    for f in features {
        for &c in &table.checkpoints() {
            let auc = evaluate(table, threshold, direction, f, c, bins).ok().map(|e| e.auc);
            out.push(AucEntry { feature: f.clone(), checkpoint: c, auc });
        }
    }
    out
}

/// Feature selectors available for a table: the joint FTLE vector, each FTLE, the mean
/// CLV angle, the loss and every CLV pair.
pub fn standard_features(dim: usize) -> Vec<String> {
    let mut f = vec!["ftle".to_string()];
    f.extend((1..=dim).map(|q| format!("ftle{q}")));
    f.push("meancos".into());
    f.push("loss".into());
    for i in 1..=dim {
        for j in (i + 1)..=dim {
            f.push(format!("cos{i}_{j}"));
        }
    }
    f
}
