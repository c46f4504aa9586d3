use serde::{Deserialize, Serialize};

use super::labels::LabeledFeatures;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 20;

/// Laplace pseudo-count added to every histogram bin.
const ALPHA: f64 = 1.0;

/// Naive Bayes over equal-width histograms, one per feature and class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub names: Vec<String>,
    pub bins: usize,
    /// Train-split `[min, max]` of each feature.
    pub ranges: Vec<(f64, f64)>,
    /// `P(bin | positive)` per feature.
    pub positive: Vec<Vec<f64>>,
    /// `P(bin | negative)` per feature.
    pub negative: Vec<Vec<f64>>,
    pub prior_positive: f64,
    pub prior_negative: f64,
}

impl BayesModel {
    /// Bin of `x` for `feature`, clamped to the edge bins outside the train range.
    pub fn bin_of(&self, feature: usize, x: f64) -> usize {
        let (lo, hi) = self.ranges[feature];
        if !(hi > lo) {
            return 0;
        }
        let t = ((x - lo) / (hi - lo) * self.bins as f64).floor();
        if t.is_nan() || t < 0.0 {
            0
        } else {
            (t as usize).min(self.bins - 1)
        }
    }

    /// `(ln P(features, positive), ln P(features, negative))`
    pub fn log_joint(&self, features: &[f64]) -> Result<(f64, f64)> {
        if features.len() != self.names.len() {
            return Err(Error::input(format!("model has {} features, got {}", self.names.len(), features.len())));
        }
        let mut pos = self.prior_positive.ln();
        let mut neg = self.prior_negative.ln();
        for (f, &x) in features.iter().enumerate() {
            let b = self.bin_of(f, x);
            pos += self.positive[f][b].ln();
            neg += self.negative[f][b].ln();
        }
        Ok((pos, neg))
    }
}

/// Fits per-feature histograms on the train split.
pub fn fit_naive_bayes(data: &LabeledFeatures, bins: usize) -> Result<BayesModel> {
    if bins < 2 {
        return Err(Error::input(format!("naive Bayes needs at least 2 bins, got {bins}")));
    }
    let n_features = data.names.len();
    let train: Vec<_> = data.train().collect();
    let n_pos = train.iter().filter(|r| r.positive).count();
    let n_neg = train.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::config("training split needs both classes"));
    }
    let ranges: Vec<(f64, f64)> = (0..n_features)
        .map(|f| {
            train.iter().map(|r| r.features[f]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        })
        .collect();
    let mut model = BayesModel {
        names: data.names.clone(),
        bins,
        ranges,
        positive: vec![vec![0.0; bins]; n_features],
        negative: vec![vec![0.0; bins]; n_features],
        prior_positive: n_pos as f64 / train.len() as f64,
        prior_negative: n_neg as f64 / train.len() as f64,
    };
    for r in &train {
        for (f, &x) in r.features.iter().enumerate() {
            let b = model.bin_of(f, x);
            if r.positive {
                model.positive[f][b] += 1.0;
            } else {
                model.negative[f][b] += 1.0;
            }
        }
    }
    let denom = |n: usize| n as f64 + ALPHA * bins as f64;
    for hist in &mut model.positive {
        hist.iter_mut().for_each(|c| *c = (*c + ALPHA) / denom(n_pos));
    }
    for hist in &mut model.negative {
        hist.iter_mut().for_each(|c| *c = (*c + ALPHA) / denom(n_neg));
    }
    Ok(model)
}

/// `P(positive | features)`, evaluated in log space.
pub fn predict_posterior(model: &BayesModel, features: &[f64]) -> Result<f64> {
    let (pos, neg) = model.log_joint(features)?;
    // logistic of the log-odds, written to stay finite for any magnitude
    let odds = neg - pos;
    Ok(if odds > 0.0 {
        let e = (-odds).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + odds.exp())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::labels::{LabeledRow, Split};
    use proptest::prelude::*;

    fn data(rows: &[(f64, bool)]) -> LabeledFeatures {
        LabeledFeatures {
            names: vec!["x".into()],
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, &(x, positive))| LabeledRow { run_id: 2 * i as u64, features: vec![x], positive, split: Split::Train })
                .collect(),
            dropped: 0,
        }
    }

    #[test]
    fn laplace_counts() {
        let m = fit_naive_bayes(&data(&[(0.1, true), (0.2, true), (0.9, false)]), 2).unwrap();
        assert_eq!(m.positive[0][0], 0.75);
        assert_eq!(m.negative[0][0], 1.0 / 3.0);
        assert_eq!(m.positive[0][1], 0.25);
        assert_eq!(m.negative[0][1], 2.0 / 3.0);
        // brute-force Bayes rule for the query 0.15 (first bin)
        let p = 2.0 / 3.0 * 0.75;
        let n = 1.0 / 3.0 * (1.0 / 3.0);
        let expected = p / (p + n);
        assert!((predict_posterior(&m, &[0.15]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_model_gives_one_half() {
        let m = BayesModel {
            names: vec!["a".into(), "b".into()],
            bins: 2,
            ranges: vec![(0.0, 1.0); 2],
            positive: vec![vec![0.5; 2]; 2],
            negative: vec![vec![0.5; 2]; 2],
            prior_positive: 0.5,
            prior_negative: 0.5,
        };
        assert_eq!(predict_posterior(&m, &[0.3, 0.9]).unwrap(), 0.5);
        assert!(predict_posterior(&m, &[0.3]).is_err());
    }

    #[test]
    fn mirrored_data_gives_mirrored_model() {
        let rows = [(0.1, true), (0.25, true), (0.45, false), (0.9, false), (0.62, true)];
        let mirrored: Vec<(f64, bool)> = rows.iter().map(|&(x, p)| (-x, !p)).collect();
        let a = fit_naive_bayes(&data(&rows), 4).unwrap();
        let b = fit_naive_bayes(&data(&mirrored), 4).unwrap();
        let rev = |h: &Vec<f64>| h.iter().rev().copied().collect::<Vec<_>>();
        assert_eq!(rev(&a.positive[0]), b.negative[0]);
        assert_eq!(rev(&a.negative[0]), b.positive[0]);
        assert_eq!(a.prior_positive, b.prior_negative);
    }

    #[test]
    fn constant_feature_and_out_of_range_queries() {
        let m = fit_naive_bayes(&data(&[(1.0, true), (1.0, false)]), 5).unwrap();
        let s = predict_posterior(&m, &[1e300]).unwrap();
        assert!(s.is_finite() && (0.0..=1.0).contains(&s));
        let m = fit_naive_bayes(&data(&[(0.0, true), (1.0, false)]), 5).unwrap();
        assert_eq!(m.bin_of(0, -50.0), 0);
        assert_eq!(m.bin_of(0, 50.0), 4);
        assert_eq!(m.bin_of(0, 1.0), 4);
    }

    #[test]
    fn bins_below_two_rejected() {
        assert!(fit_naive_bayes(&data(&[(0.0, true), (1.0, false)]), 1).is_err());
    }

    #[test]
    fn factorized_log_posterior() {
        let d = LabeledFeatures {
            names: vec!["a".into(), "b".into(), "c".into()],
            rows: (0..30)
                .map(|i| LabeledRow {
                    run_id: 2 * i,
                    features: vec![i as f64, (i * 7 % 11) as f64, (i * i % 5) as f64],
                    positive: i % 3 == 0,
                    split: Split::Train,
                })
                .collect(),
            dropped: 0,
        };
        let m = fit_naive_bayes(&d, 4).unwrap();
        let q = [3.5, 2.0, 4.0];
        let (pos, _) = m.log_joint(&q).unwrap();
        let mut manual = m.prior_positive.ln();
        for (f, x) in q.iter().enumerate() {
            manual += m.positive[f][m.bin_of(f, *x)].ln();
        }
        assert_eq!(pos, manual);
    }

    proptest! {
        #[test]
        fn histograms_normalized_and_posteriors_calibrated(
            xs in prop::collection::vec((-10.0f64..10.0, any::<bool>()), 2..60),
            bins in 2usize..30,
            q in -20.0f64..20.0,
        ) {
            let mut rows = xs;
            rows.push((0.0, true));
            rows.push((1.0, false));
            let m = fit_naive_bayes(&data(&rows), bins).unwrap();
            for h in m.positive.iter().chain(m.negative.iter()) {
                prop_assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(h.iter().all(|&p| p > 0.0));
            }
            let p = predict_posterior(&m, &[q]).unwrap();
            let (lp, ln) = m.log_joint(&[q]).unwrap();
            let other = 1.0 / (1.0 + (lp - ln).exp());
            prop_assert!((p + other - 1.0).abs() < 1e-12);
        }
    }
}
