//! File formats: dataset CSV, run records as JSON, log-diagonal sequences as CSV.
//!
//! JSON has no encoding for non-finite numbers, so run records write them as the
//! strings `"inf"`, `"-inf"` and `"nan"`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::train::RunRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
struct Lenient(f64);

impl Serialize for Lenient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Lenient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Lenient(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Lenient(f64::INFINITY)),
                "-inf" => Ok(Lenient(f64::NEG_INFINITY)),
                "nan" => Ok(Lenient(f64::NAN)),
                other => Err(de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

pub(crate) mod non_finite_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        Lenient(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Lenient::deserialize(d)?.0)
    }
}

pub(crate) mod non_finite_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| Lenient(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Ok(Vec::<Lenient>::deserialize(d)?.into_iter().map(|x| x.0).collect())
    }
}

pub(crate) mod non_finite_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|row| row.iter().map(|&x| Lenient(x)).collect::<Vec<_>>()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Vec<Lenient>>::deserialize(d)?.into_iter().map(|r| r.into_iter().map(|x| x.0).collect()).collect())
    }
}

/// Writes `x1,x2,y` rows.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "y"])?;
    for (x, y) in dataset.x.iter().zip(&dataset.y) {
        w.write_record([x[0].to_string(), x[1].to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV; targets are taken from the file as written.
pub fn read_dataset_csv(path: &Path, seed: u64) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["x1", "x2", "y"] {
        return Err(Error::input(format!("{}: expected header x1,x2,y", path.display())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::input(format!("{}: bad number {:?}", path.display(), &row[i])))
        };
        x.push([field(0)?, field(1)?]);
        y.push(field(2)?);
    }
    if y.is_empty() {
        return Err(Error::input(format!("{}: no observations", path.display())));
    }
    Ok(Dataset { x, y, seed })
}

pub fn write_record_json(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, record)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_records_json(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, records)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_records_json(path: &Path) -> Result<Vec<RunRecord>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `interval,logr1..logrD`, one row per orthogonalization interval.
pub fn write_log_r_csv(log_r: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = log_r.first().map_or(0, Vec::len);
    let mut header = vec!["interval".to_string()];
    header.extend((1..=dim).map(|q| format!("logr{q}")));
    w.write_record(&header)?;
    for (k, row) in log_r.iter().enumerate() {
        let mut fields = vec![k.to_string()];
        fields.extend(row.iter().map(f64::to_string));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log_r_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let values = row
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| Error::input(format!("{}: bad number {f:?}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        out.push(values);
    }
    Ok(out)
}

/// Whole-run exponents against final loss, `lq,cf,q` with `q` counted from 1.
pub fn write_le_vs_cf_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lq", "cf", "q"])?;
    for rec in records {
        for (q, l) in rec.spectrum.iter().enumerate() {
            w.write_record([l.to_string(), rec.c_f.to_string(), (q + 1).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::generate_dataset;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Probe {
        #[serde(with = "non_finite_f64")]
        a: f64,
        #[serde(with = "non_finite_vec")]
        b: Vec<f64>,
    }

    #[test]
    fn non_finite_values_round_trip() {
        let p = Probe { a: f64::INFINITY, b: vec![1.5, f64::NEG_INFINITY] };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"a":"inf","b":[1.5,"-inf"]}"#);
        assert_eq!(serde_json::from_str::<Probe>(&text).unwrap(), p);
        let nan: Probe = serde_json::from_str(r#"{"a":"nan","b":[]}"#).unwrap();
        assert!(nan.a.is_nan());
        assert!(serde_json::from_str::<Probe>(r#"{"a":"big","b":[]}"#).is_err());
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let d = generate_dataset(50, 3).unwrap();
        write_dataset_csv(&d, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,y\n"));
        assert_eq!(text.lines().count(), 51);
        assert_eq!(read_dataset_csv(&path, 3).unwrap(), d);
    }

    #[test]
    fn log_r_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logr.csv");
        let rows = vec![vec![0.1 + 0.2, -1e-300, std::f64::consts::PI], vec![1.0 / 3.0, -0.0, 7e15]];
        write_log_r_csv(&rows, &path).unwrap();
        assert_eq!(read_log_r_csv(&path).unwrap(), rows);
    }
}
