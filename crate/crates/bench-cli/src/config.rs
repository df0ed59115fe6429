//! Experiment configuration: a flat key-value file (TOML syntax, section
//! headers allowed but ignored) plus `--key=value` overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use gpfso::{
    Breakpoints, Execution, GpfsoConfig, KernelStrategy, LearningRate, MixtureVariant, Norm,
    RecordStride, ScheduleConfig,
};
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("key `{0}` is set twice")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key(s): {0}")]
    Unknown(String),
    #[error("override `{0}` is not of the form --key=value")]
    Override(String),
    #[error(transparent)]
    Engine(#[from] gpfso::Error),
}

/// Raw key-value pairs after flattening sections.
pub type RawConfig = BTreeMap<String, Value>;

pub fn parse_config_text(text: &str) -> Result<RawConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut out = RawConfig::new();
    flatten(table, &mut out)?;
    Ok(out)
}

fn flatten(table: toml::Table, out: &mut RawConfig) -> Result<(), ConfigError> {
    for (k, v) in table {
        match v {
            Value::Table(inner) => flatten(inner, out)?,
            v => {
                if out.insert(k.clone(), v).is_some() {
                    return Err(ConfigError::Duplicate(k));
                }
            }
        }
    }
    Ok(())
}

/// Parses an override value: a TOML scalar or array, a comma list, or a bare string.
pub fn parse_value(s: &str) -> Value {
    if let Ok(mut t) = format!("v = {s}").parse::<toml::Table>() {
        if let Some(v) = t.remove("v") {
            return v;
        }
    }
    if s.contains(',') {
        return Value::Array(s.split(',').map(|p| parse_value(p.trim())).collect());
    }
    Value::String(s.to_string())
}

/// Applies one `--key=value` argument.
pub fn apply_override(raw: &mut RawConfig, arg: &str) -> Result<(), ConfigError> {
    let body = arg
        .strip_prefix("--")
        .ok_or_else(|| ConfigError::Override(arg.to_string()))?;
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(arg.to_string()))?;
    if k.is_empty() {
        return Err(ConfigError::Override(arg.to_string()));
    }
    raw.insert(k.to_string(), parse_value(v));
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    /// `N(theta, 1)` observations with the given true mean.
    Gaussian { true_mean: f64 },
    Cqr { dim: usize, tau: f64 },
    Multimodal { dim: usize },
    Sagm,
}

impl ModelChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Gaussian { .. } => "gaussian",
            ModelChoice::Cqr { .. } => "cqr",
            ModelChoice::Multimodal { .. } => "multimodal",
            ModelChoice::Sagm => "sagm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Pfso,
    Adagrad { step_size: f64, epsilon: f64 },
    /// Exact Gaussian recursion (Gaussian model only).
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Fresh i.i.d. draws from the model's simulator.
    Simulate,
    /// Resampling with replacement from one simulated sample of `sample_size`.
    Bootstrap { sample_size: usize },
    /// Records from a dataset file, in order or bootstrapped.
    File { path: PathBuf, bootstrap: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Gaussian model: prior mean. CQR: offset added to the truth.
    pub location: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub method: Method,
    /// Engine settings; `seed` is the base seed of replication 0.
    pub gpfso: GpfsoConfig,
    pub prior: PriorSpec,
    pub steps: u64,
    pub replications: usize,
    pub stride: RecordStride,
    pub output: PathBuf,
    pub norm: Norm,
    pub slope_window: (f64, f64),
    pub thresholds: Vec<f64>,
    pub data: DataSource,
    /// Worker threads for replications; 0 uses every core.
    pub threads: usize,
    /// Known parameter for file data, used for error columns.
    pub truth: Option<Vec<f64>>,
}

struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<&'static str>,
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl<'a> Reader<'a> {
    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.raw.get(key)
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(bad(key, format!("expected a number, got {v}"))),
        }
    }

    fn opt_u64(&mut self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            // allow 1e6-style literals when they are whole numbers
            Some(Value::Float(x)) if *x >= 0.0 && x.fract() == 0.0 && *x < 2f64.powi(63) => Ok(Some(*x as u64)),
            Some(v) => Err(bad(key, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn u64(&mut self, key: &'static str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.opt_u64(key)?.unwrap_or(default))
    }

    fn string(&mut self, key: &'static str, default: &str) -> Result<String, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(bad(key, format!("expected a string, got {v}"))),
        }
    }

    fn bool(&mut self, key: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(bad(key, format!("expected true or false, got {v}"))),
        }
    }

    fn f64_list(&mut self, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        let v = match self.get(key) {
            None => return Ok(None),
            Some(v) => v,
        };
        let items: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            v => vec![v],
        };
        items
            .into_iter()
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                v => Err(bad(key, format!("expected numbers, got {v}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn unknown(&self) -> Vec<String> {
        self.raw
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .cloned()
            .collect()
    }
}

/// Keys that `sweep` expands when given as lists.
pub const SWEEP_KEYS: [&str; 3] = ["alpha", "c_sigma", "nu"];

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        for key in SWEEP_KEYS {
            if let Some(Value::Array(_)) = raw.get(key) {
                return Err(bad(key, "lists are only accepted by `sweep`"));
            }
        }
        let mut r = Reader {
            raw,
            used: BTreeSet::new(),
        };

        let model = match r.get("model") {
            None => return Err(ConfigError::Missing("model")),
            Some(Value::String(s)) => s.clone(),
            Some(v) => return Err(bad("model", format!("expected a string, got {v}"))),
        };
        let model = match model.as_str() {
            "gaussian" => ModelChoice::Gaussian {
                true_mean: r.f64("true_mean", 0.0)?,
            },
            "cqr" => {
                let dim = r.u64("dim", 5)? as usize;
                if dim < 2 {
                    return Err(bad("dim", "cqr needs dim >= 2"));
                }
                let tau = r.f64("tau", 0.5)?;
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(bad("tau", "must lie in (0, 1)"));
                }
                ModelChoice::Cqr { dim, tau }
            }
            "multimodal" => {
                let dim = r.u64("dim", 20)? as usize;
                if dim == 0 {
                    return Err(bad("dim", "must be positive"));
                }
                ModelChoice::Multimodal { dim }
            }
            "sagm" => ModelChoice::Sagm,
            other => return Err(bad("model", format!("unknown model `{other}`"))),
        };

        let method = match r.string("method", "gpfso")?.as_str() {
            "gpfso" => Method::Pfso,
            "adagrad" => {
                if !matches!(model, ModelChoice::Cqr { .. }) {
                    return Err(bad("method", "adagrad needs gradients; only cqr provides them"));
                }
                let step_size = r.f64("step_size", 0.1)?;
                if !(step_size > 0.0) {
                    return Err(bad("step_size", "must be positive"));
                }
                Method::Adagrad {
                    step_size,
                    epsilon: r.f64("epsilon", gpfso::adagrad::DEFAULT_EPSILON)?,
                }
            }
            "oracle" => {
                if !matches!(model, ModelChoice::Gaussian { .. }) {
                    return Err(bad("method", "the exact recursion exists for the gaussian model only"));
                }
                Method::Oracle
            }
            other => return Err(bad("method", format!("unknown method `{other}`"))),
        };

        let learning_rate = match (r.opt_f64("alpha")?, r.opt_f64("h")?) {
            (Some(_), Some(_)) => return Err(bad("h", "set either alpha or a constant h, not both")),
            (_, Some(h)) => LearningRate::Constant(h),
            (a, None) => LearningRate::Power(a.unwrap_or(0.5)),
        };
        let nu = r.f64("nu", 50.0)?;
        let breakpoints = match r.f64_list("breakpoints")? {
            Some(list) => {
                let mut pts = Vec::with_capacity(list.len());
                for x in list {
                    if !(x >= 1.0 && x.fract() == 0.0) {
                        return Err(bad("breakpoints", "entries must be positive integers"));
                    }
                    pts.push(x as u64);
                }
                Breakpoints::Explicit(pts)
            }
            None => Breakpoints::Recursive(ScheduleConfig {
                a: r.f64("sched_a", 1.0)?,
                b: r.f64("sched_b", 1.0)?,
                t0: r.u64("t0", 5)?,
                rho: r.f64("rho", 0.1)?,
            }),
        };
        let kernel = match r.string("kernel", "gpfso")?.as_str() {
            "gpfso" => KernelStrategy::Gpfso,
            "mix" => {
                let variant = match r.string("mix_variant", "student")?.as_str() {
                    "gauss" => MixtureVariant::Gauss,
                    "dirac" => MixtureVariant::Dirac,
                    "student" => MixtureVariant::Student(r.f64("mix_nu", 1.0)?),
                    other => return Err(bad("mix_variant", format!("unknown variant `{other}`"))),
                };
                KernelStrategy::GpfsoMix {
                    weight: r.f64("mix_weight", 0.5)?,
                    variant,
                }
            }
            "ks" => KernelStrategy::KsPfso {
                iota: r.f64("iota", 0.68)?,
            },
            "jitter" => KernelStrategy::Jitter {
                scale: r.f64("jitter_scale", 1.0)?,
            },
            other => return Err(bad("kernel", format!("unknown kernel `{other}`"))),
        };
        let execution = if r.bool("parallel", true)? {
            Execution::Parallel
        } else {
            Execution::Sequential
        };
        let gpfso = GpfsoConfig {
            n_particles: r.u64("n_particles", 1000)? as usize,
            c_ess: r.f64("c_ess", 0.7)?,
            nu,
            learning_rate,
            c_sigma: r.f64("c_sigma", 1.0)?,
            sigma_diag: None,
            breakpoints,
            kernel,
            burn_in: r.u64("burn_in", 0)?,
            seed: r.u64("seed", 0)?,
            execution,
        };
        let dim = match &model {
            ModelChoice::Gaussian { .. } => 1,
            ModelChoice::Cqr { dim, .. } | ModelChoice::Multimodal { dim } => *dim,
            ModelChoice::Sagm => gpfso::models::SagmParams::dim(2, 4),
        };
        gpfso.validate(dim)?;

        let prior = match &model {
            ModelChoice::Gaussian { .. } => PriorSpec {
                location: r.f64("prior_mean", 0.0)?,
                variance: r.f64("prior_var", 25.0)?,
            },
            _ => PriorSpec {
                location: r.f64("prior_shift", 10.0)?,
                variance: r.f64("prior_var", 2.0)?,
            },
        };
        if !(prior.variance > 0.0) {
            return Err(bad("prior_var", "must be positive"));
        }

        let steps = r.opt_u64("steps")?.ok_or(ConfigError::Missing("steps"))?;
        if steps == 0 {
            return Err(bad("steps", "must be at least 1"));
        }
        let replications = r.u64("replications", 1)? as usize;
        if replications == 0 {
            return Err(bad("replications", "must be at least 1"));
        }
        let stride = match (r.opt_u64("record_every")?, r.opt_f64("record_factor")?) {
            (Some(_), Some(_)) => return Err(bad("record_every", "set either record_every or record_factor")),
            (Some(0), None) => return Err(bad("record_every", "must be at least 1")),
            (Some(k), None) => RecordStride::Every(k),
            (None, Some(f)) if f > 1.0 => RecordStride::Geometric(f),
            (None, Some(_)) => return Err(bad("record_factor", "must exceed 1")),
            (None, None) => RecordStride::default(),
        };
        let norm = match r.string("norm", "euclidean")?.as_str() {
            "euclidean" | "l2" => Norm::Euclidean,
            "max" => Norm::Max,
            other => return Err(bad("norm", format!("unknown norm `{other}`"))),
        };
        let lo = r.f64("slope_lo", steps as f64 / 100.0)?;
        let hi = r.f64("slope_hi", steps as f64)?;
        let thresholds = r.f64_list("thresholds")?.unwrap_or_default();

        let bootstrap = r.bool("bootstrap", false)?;
        let data = match r.string("data", "simulate")?.as_str() {
            "simulate" if bootstrap => {
                let n = r.opt_u64("sample_size")?.ok_or(ConfigError::Missing("sample_size"))?;
                if n == 0 {
                    return Err(bad("sample_size", "must be positive"));
                }
                DataSource::Bootstrap { sample_size: n as usize }
            }
            "simulate" => DataSource::Simulate,
            "file" => DataSource::File {
                path: PathBuf::from(r.string("data_file", "")?).to_path_buf(),
                bootstrap,
            },
            other => return Err(bad("data", format!("unknown data source `{other}`"))),
        };
        if let DataSource::File { path, .. } = &data {
            if path.as_os_str().is_empty() {
                return Err(ConfigError::Missing("data_file"));
            }
        }
        let truth = r.f64_list("truth")?;
        if let Some(t) = &truth {
            if t.len() != dim {
                return Err(bad("truth", format!("expected {dim} values, got {}", t.len())));
            }
        }

        let cfg = ExperimentConfig {
            model,
            method,
            gpfso,
            prior,
            steps,
            replications,
            stride,
            output: PathBuf::from(r.string("output", "out")?),
            norm,
            slope_window: (lo, hi),
            thresholds,
            data,
            threads: r.u64("threads", 0)? as usize,
            truth,
        };
        let unknown = r.unknown();
        if !unknown.is_empty() {
            return Err(ConfigError::Unknown(unknown.join(", ")));
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            ModelChoice::Gaussian { .. } => 1,
            ModelChoice::Cqr { dim, .. } | ModelChoice::Multimodal { dim } => *dim,
            ModelChoice::Sagm => gpfso::models::SagmParams::dim(2, 4),
        }
    }
}

/// Expands list-valued sweep keys into the cartesian product of configs.
///
/// Each entry carries a label such as `alpha=0.3_nu=2`.
pub fn sweep_grid(raw: &RawConfig) -> Vec<(String, RawConfig)> {
    let mut grid = vec![(String::new(), raw.clone())];
    for key in SWEEP_KEYS {
        let values = match raw.get(key) {
            Some(Value::Array(a)) => a.clone(),
            _ => continue,
        };
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for (label, cfg) in &grid {
            for v in &values {
                let mut c = cfg.clone();
                c.insert(key.to_string(), v.clone());
                let tag = format!("{key}={v}");
                let l = if label.is_empty() { tag } else { format!("{label}_{tag}") };
                next.push((l, c));
            }
        }
        grid = next;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
model = "gaussian"
steps = 100

[engine]
n_particles = 50
alpha = 0.3
"#;

    #[test]
    fn sections_flatten() {
        let raw = parse_config_text(BASIC).unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.gpfso.n_particles, 50);
        assert_eq!(cfg.gpfso.learning_rate, LearningRate::Power(0.3));
        assert_eq!(cfg.slope_window, (1.0, 100.0));
    }

    #[test]
    fn duplicate_across_sections() {
        let err = parse_config_text("steps = 3\n[a]\nsteps = 4\n").unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate(k) if k == "steps"));
    }

    #[test]
    fn overrides() {
        let mut raw = parse_config_text(BASIC).unwrap();
        apply_override(&mut raw, "--n_particles=7").unwrap();
        apply_override(&mut raw, "--output=/tmp/x y").unwrap();
        apply_override(&mut raw, "--steps=1e3").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.gpfso.n_particles, 7);
        assert_eq!(cfg.output, PathBuf::from("/tmp/x y"));
        assert_eq!(cfg.steps, 1000);
        assert!(apply_override(&mut raw, "steps=3").is_err());
        assert!(apply_override(&mut raw, "--steps").is_err());
    }

    #[test]
    fn value_parsing() {
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("cqr"), Value::String("cqr".into()));
        assert_eq!(parse_value("true"), Value::Boolean(true));
        assert_eq!(
            parse_value("0.3,0.5"),
            Value::Array(vec![Value::Float(0.3), Value::Float(0.5)])
        );
        assert_eq!(parse_value("[1, 2]"), Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
    }

    #[test]
    fn rejects_bad_configs() {
        for extra in [
            "--c_ess=1.5",
            "--tau=0.3",
            "--kernel=wobble",
            "--colour=blue",
            "--alpha=0.3,0.5",
            "--method=adagrad",
            "--steps=0",
        ] {
            let mut raw = parse_config_text(BASIC).unwrap();
            apply_override(&mut raw, extra).unwrap();
            assert!(ExperimentConfig::from_raw(&raw).is_err(), "{extra}");
        }
        let raw = parse_config_text("steps = 3").unwrap();
        assert!(matches!(ExperimentConfig::from_raw(&raw), Err(ConfigError::Missing("model"))));
    }

    #[test]
    fn grid_expansion() {
        let mut raw = parse_config_text(BASIC).unwrap();
        apply_override(&mut raw, "--alpha=0.3,0.5").unwrap();
        apply_override(&mut raw, "--nu=[2, 3, 50]").unwrap();
        let grid = sweep_grid(&raw);
        assert_eq!(grid.len(), 6);
        assert_eq!(grid[0].0, "alpha=0.3_nu=2");
        for (_, c) in &grid {
            ExperimentConfig::from_raw(c).unwrap();
        }
    }
}
