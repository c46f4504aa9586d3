use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use weightflow::experiment::persist::{
    write_dataset_csv, write_le_vs_cf_csv, write_log_r_csv, write_record_json, write_records_json,
};
use weightflow::jacobian::{check_jacobian_random, DEFAULT_FD_STEP};
use weightflow::prediction::{
    auc_matrix, contingency_table, evaluate, feature_columns, fit_naive_bayes, label_outcomes, predict_posterior,
    standard_features, Direction, Split,
};
use weightflow::{generate_dataset, run_ensemble_records, train_run, Activation, Dims, OutcomeTable};

use crate::resolve::{resolve, Overrides, Resolved};
use crate::{GenDataArgs, JacobianArgs, PredictArgs, TrainArgs};

const RESOLVED: &str = "resolved_config.json";

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_resolved(dir: &Path, mut doc: Value, outputs: &[&str]) -> Result<()> {
    doc.as_object_mut().expect("resolved config is an object").insert("outputs".into(), json!(outputs));
    let path = dir.join(RESOLVED);
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn overrides(a: &TrainArgs) -> Overrides {
    Overrides {
        seed: a.seed,
        activation: a.activation.clone(),
        init: a.init.clone(),
        wide_sigma: a.wide_sigma,
        total_steps: a.total_steps,
        n_runs: a.n_runs,
        parallelism: a.parallelism,
        set: a.set.clone(),
    }
}

fn train_settings(a: &TrainArgs) -> Result<Resolved> {
    resolve(a.config.as_deref(), &overrides(a))
}

pub fn gen_data(a: GenDataArgs) -> Result<String> {
    let (dir, out) = match (&a.out_dir, &a.out) {
        (Some(d), Some(o)) => (d.clone(), o.clone()),
        (Some(d), None) => (d.clone(), d.join("data.csv")),
        (None, Some(o)) => (o.parent().map(Path::to_path_buf).unwrap_or_default(), o.clone()),
        (None, None) => (PathBuf::from("."), PathBuf::from("data.csv")),
    };
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    prepare(&dir)?;
    let data = generate_dataset(a.n, a.seed)?;
    write_dataset_csv(&data, &out).with_context(|| format!("writing {}", out.display()))?;
    let out_name = out.display().to_string();
    write_resolved(&dir, json!({"n": a.n, "seed": a.seed}), &[&out_name])?;
    Ok(json!({"command": "gen-data", "rows": a.n, "seed": a.seed, "out": out_name}).to_string())
}

pub fn run(a: TrainArgs) -> Result<String> {
    let r = train_settings(&a)?;
    prepare(&a.out_dir)?;
    let data = generate_dataset(r.train.n_samples, r.train.seeds.data)?;
    let rec = train_run(&r.train, &data, 0)?;
    write_record_json(&rec, &a.out_dir.join("run_record.json"))?;
    write_log_r_csv(&rec.log_r, &a.out_dir.join("rsequence.csv"))?;
    write_resolved(&a.out_dir, r.to_json(), &["run_record.json", "rsequence.csv"])?;
    Ok(json!({
        "command": "run",
        "c_f": finite_or_string(rec.c_f),
        "diverged": rec.diverged,
        "l1": finite_or_string(rec.spectrum[0]),
        "config_hash": rec.config_hash,
        "out_dir": a.out_dir.display().to_string(),
    })
    .to_string())
}

pub fn ensemble(a: TrainArgs) -> Result<String> {
    let r = train_settings(&a)?;
    prepare(&a.out_dir)?;
    let data = generate_dataset(r.train.n_samples, r.train.seeds.data)?;
    let records = run_ensemble_records(&r.train, &data, r.n_runs, r.parallelism)?;
    let table = OutcomeTable::from_records(&r.train, &records)?;
    table.write_csv_file(&a.out_dir.join("outcome_table.csv"))?;
    write_records_json(&records, &a.out_dir.join("runs.json"))?;
    write_le_vs_cf_csv(&records, &a.out_dir.join("le_vs_cf.csv"))?;
    write_resolved(&a.out_dir, r.to_json(), &["outcome_table.csv", "runs.json", "le_vs_cf.csv"])?;
    let diverged = records.iter().filter(|r| r.diverged).count();
    let chaotic = records.iter().filter(|r| r.spectrum[0] > 0.0).count();
    Ok(json!({
        "command": "ensemble",
        "n_runs": records.len(),
        "diverged": diverged,
        "above_100": records.iter().filter(|r| r.c_f > 100.0).count(),
        "below_4": records.iter().filter(|r| r.c_f < 4.0).count(),
        "l1_positive": chaotic,
        "out_dir": a.out_dir.display().to_string(),
    })
    .to_string())
}

pub fn jacobian_check(a: JacobianArgs) -> Result<String> {
    let activation: Activation = a.activation.parse()?;
    let report = check_jacobian_random(Dims::default(), activation, a.trials, a.batch_size, a.step, a.seed)?;
    prepare(&a.out_dir)?;
    let settings = json!({
        "activation": activation.name(),
        "trials": a.trials,
        "batch_size": a.batch_size,
        "seed": a.seed,
        "step": a.step,
    });
    write_resolved(&a.out_dir, settings, &[])?;
    let mut summary = serde_json::to_value(report)?;
    let obj = summary.as_object_mut().expect("report is an object");
    obj.insert("activation".into(), activation.name().into());
    obj.insert("trials".into(), a.trials.into());
    if a.step != DEFAULT_FD_STEP {
        obj.insert("step".into(), a.step.into());
    }
    Ok(summary.to_string())
}

struct Prediction {
    table: OutcomeTable,
    threshold: f64,
    direction: Direction,
    checkpoint: usize,
}

fn load_prediction(a: &PredictArgs) -> Result<Prediction> {
    let table = OutcomeTable::read_csv_file(&a.table).with_context(|| format!("reading {}", a.table.display()))?;
    let direction: Direction = a.direction.parse()?;
    let threshold = a.threshold.unwrap_or(match direction {
        Direction::Above => 100.0,
        Direction::Below => 4.0,
    });
    let checkpoints = table.checkpoints();
    let checkpoint = match a.checkpoint {
        Some(c) => c,
        None if checkpoints.contains(&1000) => 1000,
        None => *checkpoints.first().ok_or_else(|| weightflow::Error::Input("outcome table has no checkpoints".into()))?,
    };
    Ok(Prediction { table, threshold, direction, checkpoint })
}

fn predict_settings(a: &PredictArgs, p: &Prediction) -> Value {
    json!({
        "table": a.table.display().to_string(),
        "threshold": p.threshold,
        "direction": p.direction.to_string(),
        "feature": a.feature,
        "checkpoint": p.checkpoint,
        "bins": a.bins,
    })
}

pub fn classify(a: PredictArgs) -> Result<String> {
    let p = load_prediction(&a)?;
    let columns = feature_columns(&p.table, &a.feature, p.checkpoint)?;
    let data = label_outcomes(&p.table, p.threshold, p.direction, &columns)?;
    let model = fit_naive_bayes(&data, a.bins)?;
    prepare(&a.out_dir)?;

    let mut w = csv_writer(&a.out_dir.join("predictions.csv"))?;
    w.write_record(["run_id", "split", "label", "score"])?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for row in &data.rows {
        let score = predict_posterior(&model, &row.features)?;
        let split = if row.split == Split::Train { "train" } else { "test" };
        w.write_record([row.run_id.to_string(), split.into(), u8::from(row.positive).to_string(), score.to_string()])?;
        if row.split == Split::Test {
            scores.push(score);
            labels.push(row.positive);
        }
    }
    w.flush()?;
    let contingency = contingency_table(&scores, &labels, 0.5);
    fs::write(a.out_dir.join("contingency.json"), serde_json::to_string(&contingency)? + "\n")?;

    let mut w = csv_writer(&a.out_dir.join("auc_matrix.csv"))?;
    w.write_record(["feature", "checkpoint", "auc"])?;
    for e in auc_matrix(&p.table, p.threshold, p.direction, &standard_features(p.table.state_dim()), a.bins) {
        w.write_record([e.feature, e.checkpoint.to_string(), e.auc.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    write_resolved(&a.out_dir, predict_settings(&a, &p), &["predictions.csv", "contingency.json", "auc_matrix.csv"])?;

    let eval = evaluate(&p.table, p.threshold, p.direction, &a.feature, p.checkpoint, a.bins).ok();
    Ok(json!({
        "command": "classify",
        "feature": a.feature,
        "checkpoint": p.checkpoint,
        "auc": eval.as_ref().map(|e| e.auc),
        "contingency": contingency,
        "dropped": data.dropped,
    })
    .to_string())
}

pub fn roc(a: PredictArgs) -> Result<String> {
    let p = load_prediction(&a)?;
    let eval = evaluate(&p.table, p.threshold, p.direction, &a.feature, p.checkpoint, a.bins)?;
    prepare(&a.out_dir)?;
    let mut w = csv_writer(&a.out_dir.join("roc.csv"))?;
    w.write_record(["fpr", "tpr"])?;
    for (fpr, tpr) in &eval.roc.points {
        w.write_record([fpr.to_string(), tpr.to_string()])?;
    }
    w.flush()?;
    let summary = json!({
        "auc": eval.auc,
        "n_pos": eval.n_pos,
        "n_neg": eval.n_neg,
        "feature": eval.feature,
        "checkpoint": eval.checkpoint,
    });
    fs::write(a.out_dir.join("roc_summary.json"), summary.to_string() + "\n")?;
    write_resolved(&a.out_dir, predict_settings(&a, &p), &["roc.csv", "roc_summary.json"])?;
    Ok(summary.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}
