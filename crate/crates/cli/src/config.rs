//! Experiment configuration: TOML with flat dotted keys. Every key must be
//! on the schema list below; unknown keys are rejected with their full path.

use std::collections::BTreeMap;
use std::fmt;

use hum_core::control::Observation;
use hum_core::{TimeScheme, C64};
use serde_json::{json, Value as Json};
use toml::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Duality,
    Observability,
    Controllability,
    Carleman,
    Noncontrol,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Duality => "duality",
            Experiment::Observability => "observability",
            Experiment::Controllability => "controllability",
            Experiment::Carleman => "carleman",
            Experiment::Noncontrol => "noncontrol",
        }
    }

    /// Boundary-controlled experiments default to Crank–Nicolson substeps,
    /// which keep the Gramian well conditioned.
    fn default_scheme(self) -> TimeScheme {
        match self {
            Experiment::Observability | Experiment::Controllability => TimeScheme::crank_nicolson(30),
            _ => TimeScheme::IMPLICIT_EULER,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const FIELD_KEYS: [&str; 5] = ["kind", "value", "bound", "modes", "table"];

const KEYS: &[&str] = &[
    "seed",
    "grid.extents",
    "grid.counts",
    "tree.T",
    "tree.K",
    "time.substeps",
    "time.theta",
    "weights.x0",
    "weights.sigma",
    "weights.s",
    "weights.lambda",
    "control.tol",
    "control.max_iter",
    "control.observation",
    "control.initial",
    "duality.samples",
    "observability.samples",
    "carleman.samples",
    "carleman.s_values",
    "carleman.lambda_values",
    "carleman.time_levels",
    "carleman.verify_counts",
    "carleman.form_samples",
    "noncontrol.shift",
];

fn allowed(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    matches!(parts.as_slice(), ["coeff", "a1" | "a2" | "a3", field] if FIELD_KEYS.contains(field))
}

/// How a coefficient field is produced.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(C64),
    /// Independent smooth fields per tree node with values bounded by `bound`.
    Random { bound: f64 },
    /// `Σ amp · Π_a sin(k_a π x̂_a)` over the listed modes.
    Modes(Vec<(C64, Vec<u32>)>),
    /// One value per interior node.
    Table(Vec<C64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initial {
    Zero,
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanSettings {
    pub samples: usize,
    pub s_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub time_levels: usize,
    pub verify_counts: Vec<usize>,
    pub form_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub extents: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
    pub horizon: f64,
    pub levels: usize,
    pub scheme: TimeScheme,
    /// `i·a1` (real, one spec per axis), `a2`, `a3`.
    pub a1: FieldSpec,
    pub a2: FieldSpec,
    pub a3: FieldSpec,
    pub x0: Vec<f64>,
    pub sigma: Option<f64>,
    pub s: f64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub observation: Observation,
    pub initial: Initial,
    pub samples: usize,
    pub carleman: CarlemanSettings,
    pub shift: f64,
    /// Resolved settings, defaults included, keyed by dotted path.
    pub echo: BTreeMap<String, Json>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), message: message.into() }
}

struct Reader {
    entries: BTreeMap<String, Value>,
    echo: BTreeMap<String, Json>,
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, format!("expected a number, got {}", v.type_str()))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn as_complex(key: &str, v: &Value) -> Result<C64, CliError> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok(C64::new(as_f64(key, &a[0])?, as_f64(key, &a[1])?)),
        Value::Array(_) => Err(bad(key, "complex values are written [re, im]")),
        other => Ok(C64::new(as_f64(key, other)?, 0.0)),
    }
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| bad(key, format!("expected an array, got {}", v.type_str())))
}

fn complex_json(c: C64) -> Json {
    json!([c.re, c.im])
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.entries.remove(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.take(key) {
            Some(v) => as_f64(key, &v)?,
            None => default,
        };
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = match self.take(key) {
            Some(v) => as_usize(key, &v)?,
            None => default,
        };
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = match self.take(key) {
            Some(v) => as_array(key, &v)?.iter().map(|x| as_f64(key, x)).collect::<Result<_, _>>()?,
            None => default.to_vec(),
        };
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn usize_list_or(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let v = match self.take(key) {
            Some(v) => as_array(key, &v)?.iter().map(|x| as_usize(key, x)).collect::<Result<_, _>>()?,
            None => default.to_vec(),
        };
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn str_or(&mut self, key: &str, default: &str) -> Result<String, CliError> {
        let v = match self.take(key) {
            Some(Value::String(s)) => s,
            Some(other) => return Err(bad(key, format!("expected a string, got {}", other.type_str()))),
            None => default.to_string(),
        };
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn extents(&mut self) -> Result<Vec<(f64, f64)>, CliError> {
        let key = "grid.extents";
        let v = match self.take(key) {
            Some(v) => as_array(key, &v)?
                .iter()
                .map(|pair| {
                    let p = as_array(key, pair)?;
                    if p.len() != 2 {
                        return Err(bad(key, "each extent is [lo, hi]"));
                    }
                    Ok((as_f64(key, &p[0])?, as_f64(key, &p[1])?))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![(0.0, 1.0)],
        };
        self.echo.insert(key.into(), json!(v.iter().map(|(a, b)| [*a, *b]).collect::<Vec<_>>()));
        Ok(v)
    }

    fn field(&mut self, name: &str, default: FieldSpec) -> Result<FieldSpec, CliError> {
        let k = |f: &str| format!("coeff.{name}.{f}");
        let kind_key = k("kind");
        let kind = match self.take(&kind_key) {
            Some(Value::String(s)) => Some(s),
            Some(other) => return Err(bad(&kind_key, format!("expected a string, got {}", other.type_str()))),
            None => None,
        };
        let value = self.take(&k("value"));
        let bound = self.take(&k("bound"));
        let modes = self.take(&k("modes"));
        let table = self.take(&k("table"));
        let reject = |key: String, v: &Option<Value>, kind: &str| match v {
            Some(_) => Err(bad(&key, format!("not used by kind \"{kind}\""))),
            None => Ok(()),
        };
        let kind = kind.unwrap_or_else(|| match (&value, &bound, &modes, &table, &default) {
            (Some(_), ..) => "constant".into(),
            (_, Some(_), ..) => "random".into(),
            (_, _, Some(_), ..) => "modes".into(),
            (_, _, _, Some(_), _) => "table".into(),
            (.., FieldSpec::Zero) => "zero".into(),
            (.., FieldSpec::Constant(_)) => "constant".into(),
            _ => "random".into(),
        });
        let spec = match kind.as_str() {
            "zero" => {
                for (f, v) in [("value", &value), ("bound", &bound), ("modes", &modes), ("table", &table)] {
                    reject(k(f), v, "zero")?;
                }
                FieldSpec::Zero
            }
            "constant" => {
                for (f, v) in [("bound", &bound), ("modes", &modes), ("table", &table)] {
                    reject(k(f), v, "constant")?;
                }
                match (&value, &default) {
                    (Some(v), _) => FieldSpec::Constant(as_complex(&k("value"), v)?),
                    (None, FieldSpec::Constant(c)) => FieldSpec::Constant(*c),
                    (None, _) => return Err(bad(&k("value"), "kind \"constant\" needs a value")),
                }
            }
            "random" => {
                for (f, v) in [("value", &value), ("modes", &modes), ("table", &table)] {
                    reject(k(f), v, "random")?;
                }
                let b = match &bound {
                    Some(v) => as_f64(&k("bound"), v)?,
                    None => 1.0,
                };
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(bad(&k("bound"), format!("must be finite and non-negative, got {b}")));
                }
                FieldSpec::Random { bound: b }
            }
            "modes" => {
                for (f, v) in [("value", &value), ("bound", &bound), ("table", &table)] {
                    reject(k(f), v, "modes")?;
                }
                let key = k("modes");
                let list = modes.ok_or_else(|| bad(&key, "kind \"modes\" needs a modes list"))?;
                let mut out = vec![];
                for m in as_array(&key, &list)? {
                    let t = m.as_table().ok_or_else(|| bad(&key, "each mode is {amp = .., k = [..]}"))?;
                    for field in t.keys() {
                        if field != "amp" && field != "k" {
                            return Err(bad(&format!("{key}.{field}"), "unknown mode field"));
                        }
                    }
                    let amp = as_complex(&key, t.get("amp").ok_or_else(|| bad(&key, "mode without amp"))?)?;
                    let ks = as_array(&key, t.get("k").ok_or_else(|| bad(&key, "mode without k"))?)?
                        .iter()
                        .map(|v| match v {
                            Value::Integer(i) if *i >= 1 => Ok(*i as u32),
                            _ => Err(bad(&key, "wave numbers are positive integers")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    out.push((amp, ks));
                }
                FieldSpec::Modes(out)
            }
            "table" => {
                for (f, v) in [("value", &value), ("bound", &bound), ("modes", &modes)] {
                    reject(k(f), v, "table")?;
                }
                let key = k("table");
                let t = table.ok_or_else(|| bad(&key, "kind \"table\" needs a table"))?;
                FieldSpec::Table(as_array(&key, &t)?.iter().map(|v| as_complex(&key, v)).collect::<Result<_, _>>()?)
            }
            other => {
                return Err(bad(
                    &kind_key,
                    format!("unknown kind \"{other}\" (zero, constant, random, modes, table)"),
                ))
            }
        };
        self.echo.insert(kind_key, json!(kind));
        match &spec {
            FieldSpec::Constant(c) => {
                self.echo.insert(k("value"), complex_json(*c));
            }
            FieldSpec::Random { bound } => {
                self.echo.insert(k("bound"), json!(bound));
            }
            FieldSpec::Modes(m) => {
                let list: Vec<Json> = m.iter().map(|(a, ks)| json!({"amp": complex_json(*a), "k": ks})).collect();
                self.echo.insert(k("modes"), Json::Array(list));
            }
            FieldSpec::Table(t) => {
                self.echo.insert(k("table"), Json::Array(t.iter().map(|c| complex_json(*c)).collect()));
            }
            FieldSpec::Zero => {}
        }
        Ok(spec)
    }
}

impl ExperimentConfig {
    /// Parses configuration text. Unknown keys and type errors are reported
    /// by their dotted path.
    pub fn parse(experiment: Experiment, text: &str, overrides: Overrides) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
            key: "<file>".into(),
            message: e.message().to_string(),
        })?;
        let mut entries = BTreeMap::new();
        flatten("", &table, &mut entries);
        if let Some(key) = entries.keys().find(|k| !allowed(k)) {
            return Err(bad(key, "unknown key"));
        }
        if experiment == Experiment::Noncontrol {
            if let Some(key) = entries.keys().find(|k| k.starts_with("coeff.")) {
                return Err(bad(key, "noncontrol fixes a1 = a2 = 0 and a3 = 1"));
            }
        }
        let mut r = Reader { entries, echo: BTreeMap::new() };

        let seed = match (overrides.seed, r.take("seed")) {
            (Some(s), _) => s,
            (None, Some(Value::Integer(i))) if i >= 0 => i as u64,
            (None, Some(v)) => return Err(bad("seed", format!("expected a non-negative integer, got {v}"))),
            (None, None) => 0,
        };
        r.echo.insert("seed".into(), json!(seed));

        let extents = r.extents()?;
        let default_counts = vec![15; extents.len()];
        let counts = r.usize_list_or("grid.counts", &default_counts)?;
        let horizon = r.f64_or("tree.T", 1.0)?;
        let levels = r.usize_or("tree.K", 6)?;
        let base = experiment.default_scheme();
        let scheme = TimeScheme {
            substeps: r.usize_or("time.substeps", base.substeps)?,
            theta: r.f64_or("time.theta", base.theta)?,
        };

        let (a1, a2, a3) = if experiment == Experiment::Noncontrol {
            (FieldSpec::Zero, FieldSpec::Zero, FieldSpec::Constant(C64::new(1.0, 0.0)))
        } else {
            let random = FieldSpec::Random { bound: 1.0 };
            (r.field("a1", random.clone())?, r.field("a2", random.clone())?, r.field("a3", random)?)
        };
        match &a1 {
            FieldSpec::Constant(c) if c.im != 0.0 => return Err(bad("coeff.a1.value", "i·a1 must be real")),
            FieldSpec::Table(t) if t.iter().any(|c| c.im != 0.0) => {
                return Err(bad("coeff.a1.table", "i·a1 must be real"))
            }
            FieldSpec::Modes(m) if m.iter().any(|(a, _)| a.im != 0.0) => {
                return Err(bad("coeff.a1.modes", "i·a1 must be real"))
            }
            _ => {}
        }

        let default_x0: Vec<f64> = vec![-1.0; extents.len()];
        let x0 = r.f64_list_or("weights.x0", &default_x0)?;
        let sigma = match r.take("weights.sigma") {
            Some(v) => {
                let s = as_f64("weights.sigma", &v)?;
                r.echo.insert("weights.sigma".into(), json!(s));
                Some(s)
            }
            None => None,
        };
        let s = r.f64_or("weights.s", 10.0)?;
        let lambda = r.f64_or("weights.lambda", 0.01)?;

        let tol = match overrides.tol {
            Some(t) => {
                r.take("control.tol");
                r.echo.insert("control.tol".into(), json!(t));
                t
            }
            None => r.f64_or("control.tol", 1e-6)?,
        };
        if !(tol > 0.0 && tol < 1.0) {
            return Err(bad("control.tol", format!("must lie in (0, 1), got {tol}")));
        }
        let max_iter = r.usize_or("control.max_iter", 500)?;
        if max_iter == 0 {
            return Err(bad("control.max_iter", "must be positive"));
        }
        let default_obs = if experiment == Experiment::Noncontrol { "internal" } else { "both" };
        let observation = match r.str_or("control.observation", default_obs)?.as_str() {
            "both" => Observation::BOTH,
            "internal" => Observation::INTERNAL_ONLY,
            other => {
                return Err(bad("control.observation", format!("expected \"both\" or \"internal\", got \"{other}\"")))
            }
        };
        if experiment == Experiment::Noncontrol && observation != Observation::INTERNAL_ONLY {
            return Err(bad("control.observation", "noncontrol uses internal control only"));
        }
        let initial = match r.str_or("control.initial", "random")?.as_str() {
            "zero" => Initial::Zero,
            "random" => Initial::Random,
            other => return Err(bad("control.initial", format!("expected \"zero\" or \"random\", got \"{other}\""))),
        };

        let (sample_key, default_samples) = match experiment {
            Experiment::Duality => ("duality.samples", 10),
            Experiment::Observability => ("observability.samples", 50),
            Experiment::Carleman => ("carleman.samples", 20),
            _ => ("", 0),
        };
        let samples = if sample_key.is_empty() { 0 } else { r.usize_or(sample_key, default_samples)? };
        if !sample_key.is_empty() && samples == 0 {
            return Err(bad(sample_key, "need at least one sample"));
        }

        let carleman = if experiment == Experiment::Carleman {
            let c = CarlemanSettings {
                samples,
                s_values: r.f64_list_or("carleman.s_values", &[0.01, 0.1, 1.0, 10.0, 100.0])?,
                lambda_values: r.f64_list_or("carleman.lambda_values", &[0.01, 0.05, 0.1, 0.5, 1.0])?,
                time_levels: r.usize_or("carleman.time_levels", 64)?,
                verify_counts: r.usize_list_or("carleman.verify_counts", &vec![31; extents.len()])?,
                form_samples: r.usize_or("carleman.form_samples", 10_000)?,
            };
            for (key, list) in [("carleman.s_values", &c.s_values), ("carleman.lambda_values", &c.lambda_values)] {
                if list.is_empty() {
                    return Err(bad(key, "empty search range"));
                }
                if let Some(v) = list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(bad(key, format!("values must be positive, got {v}")));
                }
            }
            if c.time_levels < 2 {
                return Err(bad("carleman.time_levels", "need at least 2 levels"));
            }
            c
        } else {
            CarlemanSettings {
                samples: 0,
                s_values: vec![],
                lambda_values: vec![],
                time_levels: 0,
                verify_counts: vec![],
                form_samples: 0,
            }
        };
        let shift = if experiment == Experiment::Noncontrol { r.f64_or("noncontrol.shift", 1.0)? } else { 0.0 };

        // keys valid in the schema but irrelevant to this experiment
        if let Some(key) = r.entries.keys().next() {
            return Err(bad(key, format!("not used by the {experiment} experiment")));
        }
        Ok(ExperimentConfig {
            experiment,
            seed,
            extents,
            counts,
            horizon,
            levels,
            scheme,
            a1,
            a2,
            a3,
            x0,
            sigma,
            s,
            lambda,
            tol,
            max_iter,
            observation,
            initial,
            samples,
            carleman,
            shift,
            echo: r.echo,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(exp: Experiment, text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(exp, text, Overrides::default())
    }

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_describe_the_default_instance() {
        let c = parse(Experiment::Controllability, "").unwrap();
        assert_eq!((c.counts.as_slice(), c.levels), (&[15][..], 6));
        assert_eq!(c.scheme, TimeScheme::crank_nicolson(30));
        assert_eq!(c.a2, FieldSpec::Random { bound: 1.0 });
        let d = parse(Experiment::Duality, "").unwrap();
        assert_eq!(d.scheme, TimeScheme::IMPLICIT_EULER);
        assert_eq!(d.samples, 10);
    }

    #[test]
    fn sections_and_dotted_keys_are_equivalent() {
        let a = parse(Experiment::Duality, "[tree]\nK = 3\n[coeff.a2]\nkind = \"zero\"\n").unwrap();
        let b = parse(Experiment::Duality, "tree.K = 3\ncoeff.a2.kind = \"zero\"\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_keys_are_named() {
        assert_eq!(key_of(parse(Experiment::Duality, "grid.cuonts = [3]").unwrap_err()), "grid.cuonts");
        assert_eq!(key_of(parse(Experiment::Duality, "[coeff.a2]\nbogus = 1").unwrap_err()), "coeff.a2.bogus");
        assert_eq!(
            key_of(parse(Experiment::Duality, "carleman.samples = 3").unwrap_err()),
            "carleman.samples"
        );
    }

    #[test]
    fn type_errors_are_named() {
        assert_eq!(key_of(parse(Experiment::Duality, "tree.K = \"six\"").unwrap_err()), "tree.K");
        assert_eq!(key_of(parse(Experiment::Duality, "coeff.a1.value = [0, 1]").unwrap_err()), "coeff.a1.value");
        assert_eq!(
            key_of(parse(Experiment::Duality, "coeff.a2.kind = \"zero\"\ncoeff.a2.bound = 2").unwrap_err()),
            "coeff.a2.bound"
        );
    }

    #[test]
    fn coefficient_forms() {
        let c = parse(
            Experiment::Duality,
            "coeff.a2.value = [0.5, -1]\ncoeff.a3.modes = [{amp = 0.3, k = [2]}]\ncoeff.a1.kind = \"zero\"",
        )
        .unwrap();
        assert_eq!(c.a2, FieldSpec::Constant(C64::new(0.5, -1.0)));
        assert_eq!(c.a3, FieldSpec::Modes(vec![(C64::new(0.3, 0.0), vec![2])]));
        assert_eq!(c.a1, FieldSpec::Zero);
    }

    #[test]
    fn noncontrol_rejects_coefficients() {
        assert_eq!(key_of(parse(Experiment::Noncontrol, "coeff.a3.value = 2").unwrap_err()), "coeff.a3.value");
        let c = parse(Experiment::Noncontrol, "").unwrap();
        assert_eq!(c.observation, Observation::INTERNAL_ONLY);
    }

    #[test]
    fn overrides_win() {
        let c = ExperimentConfig::parse(
            Experiment::Controllability,
            "seed = 3\ncontrol.tol = 1e-3",
            Overrides { seed: Some(9), tol: Some(1e-8) },
        )
        .unwrap();
        assert_eq!((c.seed, c.tol), (9, 1e-8));
        assert_eq!(c.echo["seed"], json!(9));
    }
}
