//! Run outputs: `report.json` (deterministic for a given config and seed),
//! `timing.json`, and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value as Json};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// JSON encoding of a float. Non-finite values have no JSON number form and
/// are written as the strings `"inf"`, `"-inf"` and `"nan"`.
pub fn float_json(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// Inverse of [`float_json`].
pub fn json_float(v: &Json) -> Option<f64> {
    match v {
        Json::Number(n) => n.as_f64(),
        Json::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Scalar {
    fn to_json(&self) -> Json {
        match self {
            Scalar::Float(x) => float_json(*x),
            Scalar::Int(i) => json!(i),
            Scalar::Bool(b) => json!(b),
            Scalar::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

impl From<usize> for Scalar {
    fn from(x: usize) -> Self {
        Scalar::Int(x as u64)
    }
}

impl From<bool> for Scalar {
    fn from(x: bool) -> Self {
        Scalar::Bool(x)
    }
}

impl From<&str> for Scalar {
    fn from(x: &str) -> Self {
        Scalar::Text(x.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub criterion: String,
}

/// A CSV table. Cells are written with Rust's shortest round-trip float
/// formatting.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Table { file: file.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: vec![] }
    }

    /// Two-column `(x, y)` plot data.
    pub fn plot(file: &str, x: &str, y: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut t = Table::new(file, &[x, y]);
        for (a, b) in points {
            t.push(vec![a.into(), b.into()]);
        }
        t
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.into_iter().map(|c| c.0).collect());
    }
}

pub struct Cell(String);

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell(format!("{x:?}"))
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell(x.to_string())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell(x.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub config: BTreeMap<String, Json>,
    results: BTreeMap<String, (Scalar, String)>,
    checks: BTreeMap<String, Check>,
    pub tables: Vec<Table>,
    timing: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Report {
            experiment: cfg.experiment.name().into(),
            seed: cfg.seed,
            config: cfg.echo.clone(),
            results: BTreeMap::new(),
            checks: BTreeMap::new(),
            tables: vec![],
            timing: BTreeMap::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: impl Into<Scalar>, definition: &str) {
        self.results.insert(name.into(), (value.into(), definition.into()));
    }

    pub fn check(&mut self, name: &str, pass: bool, criterion: &str) {
        self.checks.insert(name.into(), Check { pass, criterion: criterion.into() });
    }

    pub fn result(&self, name: &str) -> Option<&Scalar> {
        self.results.get(name).map(|(v, _)| v)
    }

    pub fn checks(&self) -> &BTreeMap<String, Check> {
        &self.checks
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks.iter().filter(|(_, c)| !c.pass).map(|(n, _)| n.clone()).collect()
    }

    /// Runs `f` and records its wall time under `phase` in `timing.json`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        *self.timing.entry(phase.into()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn to_json(&self) -> Json {
        let results: Map<String, Json> = self
            .results
            .iter()
            .map(|(k, (v, d))| (k.clone(), json!({"value": v.to_json(), "definition": d})))
            .collect();
        let checks: Map<String, Json> = self
            .checks
            .iter()
            .map(|(k, c)| (k.clone(), json!({"pass": c.pass, "criterion": c.criterion})))
            .collect();
        json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "results": results,
            "checks": checks,
            "tables": self.tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
        })
    }

    pub fn timing_json(&self) -> Json {
        let phases: Map<String, Json> = self.timing.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        json!({ "phases_s": phases, "total_s": self.timing.values().sum::<f64>() })
    }

    /// Writes `report.json`, `timing.json` and every table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for t in &self.tables {
            let path = dir.join(&t.file);
            let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
            w.write_record(&t.header).map_err(|e| csv_error(&path, e))?;
            for row in &t.rows {
                w.write_record(row).map_err(|e| csv_error(&path, e))?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
        for (name, value) in [("report.json", self.to_json()), ("timing.json", self.timing_json())] {
            let path = dir.join(name);
            let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
            text.push('\n');
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }

    /// One line per result and check for the terminal.
    pub fn summary(&self) -> String {
        let mut out = format!("{} (seed {})\n", self.experiment, self.seed);
        for (k, (v, _)) in &self.results {
            let v = match v {
                Scalar::Float(x) => format!("{x:.6e}"),
                Scalar::Int(i) => i.to_string(),
                Scalar::Bool(b) => b.to_string(),
                Scalar::Text(s) => s.clone(),
            };
            out.push_str(&format!("  {k} = {v}\n"));
        }
        for (k, c) in &self.checks {
            out.push_str(&format!("  {} {k}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.criterion));
        }
        out
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let kind = match e.kind() {
        csv::ErrorKind::Io(io) => io.kind(),
        _ => std::io::ErrorKind::Other,
    };
    CliError::io(path, std::io::Error::new(kind, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_json() {
        let values = [0.1, 1.0 / 3.0, 1e-300, 5e-324, f64::MAX, -2.5e17, f64::INFINITY, f64::NEG_INFINITY];
        for x in values {
            let text = serde_json::to_string(&float_json(x)).unwrap();
            let back: Json = serde_json::from_str(&text).unwrap();
            assert_eq!(json_float(&back).unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert!(json_float(&float_json(f64::NAN)).unwrap().is_nan());
    }

    #[test]
    fn cells_use_round_trip_formatting() {
        let mut t = Table::new("t.csv", &["x"]);
        t.push(vec![0.1f64.into()]);
        t.push(vec![1e-20f64.into()]);
        assert_eq!(t.rows, vec![vec!["0.1".to_string()], vec!["1e-20".to_string()]]);
    }
}
