//! Builds a `TrainConfig` from built-in defaults, an optional JSON file and command-line
//! overrides, in increasing order of precedence.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};
use weightflow::experiment::DEFAULT_WIDE_SIGMA;
use weightflow::TrainConfig;

/// Flags that map onto config keys.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub activation: Option<String>,
    pub init: Option<String>,
    pub wide_sigma: Option<f64>,
    pub total_steps: Option<usize>,
    pub n_runs: Option<usize>,
    pub parallelism: Option<usize>,
    /// `key=value` pairs; dotted keys address nested fields, values parse as JSON and
    /// fall back to plain strings.
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub train: TrainConfig,
    pub n_runs: usize,
    pub parallelism: usize,
}

impl Resolved {
    /// The merged document, with default checkpoints made explicit.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self.train.resolved()).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.insert("n_runs".into(), self.n_runs.into());
        obj.insert("parallelism".into(), self.parallelism.into());
        v
    }
}

pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Resolved> {
    let mut doc = serde_json::to_value(TrainConfig::default())?;
    let obj = doc.as_object_mut().expect("config is an object");
    obj.insert("n_runs".into(), 200.into());
    obj.insert("parallelism".into(), 1.into());

    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let from_file: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if !from_file.is_object() {
            bail!(input("config file must hold a JSON object"));
        }
        let mut from_file = from_file;
        // a resolved config lists the files it produced; that list is output, not input
        from_file.as_object_mut().expect("checked above").remove("outputs");
        merge(&mut doc, from_file);
    }

    let mut flags = Map::new();
    if let Some(seed) = o.seed {
        flags.insert(
            "seeds".into(),
            serde_json::json!({"data": seed, "init": seed, "batch_order": seed, "ginelli": seed}),
        );
    }
    if let Some(a) = &o.activation {
        flags.insert("activation".into(), a.to_ascii_lowercase().into());
    }
    match (o.init.as_deref(), o.wide_sigma) {
        (Some("he"), Some(_)) => bail!(input("--wide-sigma only applies to --init wide")),
        (Some("he"), None) => {
            flags.insert("initializer".into(), serde_json::json!({"kind": "he"}));
        }
        (Some("wide"), sigma) => {
            flags.insert(
                "initializer".into(),
                serde_json::json!({"kind": "wide", "sigma": sigma.unwrap_or(DEFAULT_WIDE_SIGMA)}),
            );
        }
        (Some(other), _) => bail!(input(&format!("unknown initializer {other:?} (expected he or wide)"))),
        (None, Some(sigma)) => {
            flags.insert("initializer".into(), serde_json::json!({"kind": "wide", "sigma": sigma}));
        }
        (None, None) => {}
    }
    if let Some(t) = o.total_steps {
        flags.insert("total_steps".into(), t.into());
    }
    if let Some(n) = o.n_runs {
        flags.insert("n_runs".into(), n.into());
    }
    if let Some(p) = o.parallelism {
        flags.insert("parallelism".into(), p.into());
    }
    merge(&mut doc, Value::Object(flags));
    for pair in &o.set {
        apply_set(&mut doc, pair)?;
    }

    let mut obj = match doc {
        Value::Object(m) => m,
        _ => unreachable!("merged config stays an object"),
    };
    let n_runs = take_count(&mut obj, "n_runs")?;
    let parallelism = take_count(&mut obj, "parallelism")?;
    let train: TrainConfig =
        serde_json::from_value(Value::Object(obj)).map_err(|e| anyhow::anyhow!(input(&format!("config: {e}"))))?;
    train.validate()?;
    Ok(Resolved { train, n_runs, parallelism })
}

fn take_count(obj: &mut Map<String, Value>, key: &str) -> Result<usize> {
    let v = obj.remove(key).expect("ensemble keys have defaults");
    match v.as_u64() {
        Some(n) if n >= 1 => Ok(n as usize),
        _ => bail!(input(&format!("{key} must be a positive integer, got {v}"))),
    }
}

/// Recursive object merge; `top` wins.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

fn apply_set(doc: &mut Value, pair: &str) -> Result<()> {
    let (key, raw) = pair.split_once('=').ok_or_else(|| anyhow::anyhow!(input(&format!("--set expects key=value, got {pair:?}"))))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| anyhow::anyhow!(input(&format!("--set {key}: {part:?} is not inside an object"))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        // a null (e.g. default checkpoints) cannot hold nested keys
        slot = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn input(msg: &str) -> weightflow::Error {
    weightflow::Error::Input(msg.to_string())
}
