use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TksdError};

/// One fitted estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// `|theta_hat - theta_star|_2`
    pub error: f64,
    pub wall_time_ms: f64,
    pub converged: bool,
    pub theta_hat: Vec<f64>,
    /// Fraction of proposals kept when generating the data.
    pub acceptance_rate: f64,
    /// Experiment-specific extra columns.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

pub fn l2_error(theta_hat: &[f64], theta_star: &[f64]) -> f64 {
    theta_hat
        .iter()
        .zip(theta_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

const FIXED_COLUMNS: [&str; 8] = [
    "seed",
    "method",
    "n",
    "m",
    "d",
    "error",
    "wall_time_ms",
    "converged",
];

fn csv_err(e: csv::Error) -> TksdError {
    let line = e.position().map_or(0, |p| p.line());
    TksdError::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Header `seed,method,n,m,d,error,wall_time_ms,converged,theta_0..`, followed
/// by any metric columns in name order. Shorter parameter vectors leave
/// trailing theta cells empty.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let p = records.iter().map(|r| r.theta_hat.len()).max().unwrap_or(0);
    let metric_names: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.metrics.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..p).map(|j| format!("theta_{j}")));
    header.extend(metric_names.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.seed.to_string(),
            r.method.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.d.to_string(),
            r.error.to_string(),
            r.wall_time_ms.to_string(),
            r.converged.to_string(),
        ];
        row.extend((0..p).map(|j| r.theta_hat.get(j).map_or(String::new(), f64::to_string)));
        row.extend(
            metric_names
                .iter()
                .map(|k| r.metrics.get(*k).map_or(String::new(), f64::to_string)),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv_string(records: &[TrialRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Inverse of [`write_records_csv`]. The acceptance rate is not part of the
/// CSV layout and reads back as NaN.
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    if header.len() < FIXED_COLUMNS.len() || header.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b) {
        return Err(TksdError::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let extra = &header[FIXED_COLUMNS.len()..];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| TksdError::Parse { line, msg };
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", header[i])))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|e| bad(format!("column {}: {e}", header[i])))
        };
        let mut theta_hat = Vec::new();
        let mut metrics = BTreeMap::new();
        for (k, name) in extra.iter().enumerate() {
            let i = FIXED_COLUMNS.len() + k;
            if field(i).is_empty() {
                continue;
            }
            if name.starts_with("theta_") {
                theta_hat.push(num(i)?);
            } else {
                metrics.insert(name.clone(), num(i)?);
            }
        }
        out.push(TrialRecord {
            seed: int(0)?,
            method: field(1).to_string(),
            n: int(2)? as usize,
            m: int(3)? as usize,
            d: int(4)? as usize,
            error: num(5)?,
            wall_time_ms: num(6)?,
            converged: field(7)
                .parse::<bool>()
                .map_err(|e| bad(format!("column converged: {e}")))?,
            theta_hat,
            acceptance_rate: f64::NAN,
            metrics,
        });
    }
    Ok(out)
}

pub fn records_to_json(records: &[TrialRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialise")
}

pub fn records_from_json(text: &str) -> Result<Vec<TrialRecord>> {
    serde_json::from_str(text).map_err(|e| TksdError::Parse {
        line: e.line() as u64,
        msg: e.to_string(),
    })
}

/// Small rectangular result used by the summary experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Rows as JSON objects keyed by column name.
    pub fn to_json(&self) -> String {
        let rows: Vec<BTreeMap<&str, &str>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .map(String::as_str)
                    .zip(r.iter().map(String::as_str))
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("table serialises")
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, count }
    }

    /// Standard error of the difference of two independent means.
    pub fn pooled_se(&self, other: &Summary) -> f64 {
        (self.se * self.se + other.se * other.se).sqrt()
    }
}

/// Errors of the records matching `pred`.
pub fn errors_where<F: Fn(&TrialRecord) -> bool>(records: &[TrialRecord], pred: F) -> Vec<f64> {
    records
        .iter()
        .filter(|r| pred(r))
        .map(|r| r.error)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<TrialRecord> {
        let mut metrics = BTreeMap::new();
        metrics.insert("unobs_mse".to_string(), 0.1 + 0.2);
        vec![
            TrialRecord {
                seed: 7,
                method: "tksd".into(),
                n: 300,
                m: 8,
                d: 2,
                error: 1.0 / 3.0,
                wall_time_ms: 12.5,
                converged: true,
                theta_hat: vec![0.1, -2.5e-300],
                acceptance_rate: 0.5,
                metrics: BTreeMap::new(),
            },
            TrialRecord {
                seed: 8,
                method: "mle".into(),
                n: 300,
                m: 0,
                d: 3,
                error: 2.0f64.sqrt(),
                wall_time_ms: 0.0,
                converged: false,
                theta_hat: vec![1.0, 2.0, 3.0],
                acceptance_rate: 0.25,
                metrics,
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let recs = sample_records();
        let text = records_to_csv_string(&recs).unwrap();
        assert!(text.starts_with(
            "seed,method,n,m,d,error,wall_time_ms,converged,theta_0,theta_1,theta_2,unobs_mse\n"
        ));
        let back = read_records_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.theta_hat, b.theta_hat);
            assert_eq!(a.error.to_bits(), b.error.to_bits());
            assert_eq!(a.wall_time_ms, b.wall_time_ms);
            assert_eq!(
                (a.seed, &a.method, a.n, a.m, a.d),
                (b.seed, &b.method, b.n, b.m, b.d)
            );
            assert_eq!(a.converged, b.converged);
            assert_eq!(a.metrics, b.metrics);
        }
    }

    #[test]
    fn json_round_trip() {
        let recs = sample_records();
        assert_eq!(records_from_json(&records_to_json(&recs)).unwrap(), recs);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_records_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(Summary::of(&[]).mean.is_nan());
        assert_eq!(Summary::of(&[3.0]).se, 0.0);
    }
}
