//! Experiment configuration: a flat TOML table with exhaustive key checking.

use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::scenarios::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MaskEtaSweepWaveform,
    MaskEtaSweepBeam,
    SpsaLambdaSweep,
    Type1Bound,
    MisspecBound,
    SingleDatasetIrl,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MaskEtaSweepWaveform,
        ExperimentKind::MaskEtaSweepBeam,
        ExperimentKind::SpsaLambdaSweep,
        ExperimentKind::Type1Bound,
        ExperimentKind::MisspecBound,
        ExperimentKind::SingleDatasetIrl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MaskEtaSweepWaveform => "mask-eta-sweep-waveform",
            ExperimentKind::MaskEtaSweepBeam => "mask-eta-sweep-beam",
            ExperimentKind::SpsaLambdaSweep => "spsa-lambda-sweep",
            ExperimentKind::Type1Bound => "type1-bound",
            ExperimentKind::MisspecBound => "misspec-bound",
            ExperimentKind::SingleDatasetIrl => "single-dataset-irl",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment `{s}`{}", suggestion(s, &names)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub noise_variance: f64,
    /// Monte-Carlo trials for the Type-I experiment.
    pub trials: usize,
    /// Frozen noise realizations R for SPSA.
    pub replicates: usize,
    pub iterations: usize,
    /// Seeds per SPSA cell (`seed, seed + 1, ...`); medians are reported.
    pub seeds: usize,
    /// Random instances for the misspecification experiment.
    pub instances: usize,
    pub zeta_bound: f64,
    pub quantile_samples: usize,
    /// Scenario names, e.g. `waveform-u1`.
    pub scenarios: Vec<String>,
    pub dataset: Option<PathBuf>,
    pub output_dir: PathBuf,
}

const KEYS: [&str; 18] = [
    "experiment",
    "seed",
    "K",
    "m",
    "eta",
    "lambda",
    "gamma",
    "noise_variance",
    "trials",
    "replicates",
    "iterations",
    "seeds",
    "instances",
    "zeta_bound",
    "quantile_samples",
    "scenarios",
    "dataset",
    "output_dir",
];

fn suggestion(word: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| format!(" (did you mean `{c}`?)"))
        .unwrap_or_default()
}

impl ExperimentConfig {
    /// Defaults for an experiment kind, with the given seed.
    pub fn defaults(experiment: ExperimentKind, seed: u64) -> Self {
        let (k, scenarios): (usize, &[&str]) = match experiment {
            ExperimentKind::MaskEtaSweepWaveform => (20, &["waveform-u1", "waveform-u2"]),
            ExperimentKind::MaskEtaSweepBeam => (20, &["beam"]),
            ExperimentKind::SpsaLambdaSweep => (10, &["waveform-u1"]),
            ExperimentKind::Type1Bound => (10, &["waveform-u1"]),
            ExperimentKind::MisspecBound => (8, &["waveform-u1", "beam"]),
            ExperimentKind::SingleDatasetIrl => (0, &[]),
        };
        let gamma = match experiment {
            ExperimentKind::Type1Bound | ExperimentKind::SpsaLambdaSweep => vec![0.05, 0.1, 0.2],
            _ => vec![0.1],
        };
        ExperimentConfig {
            experiment,
            seed,
            k,
            m: 4,
            eta: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            lambda: vec![1.0, 10.0, 100.0, 1000.0],
            gamma,
            noise_variance: 0.3,
            trials: 2000,
            replicates: 50,
            iterations: 2000,
            seeds: 5,
            instances: 200,
            zeta_bound: 0.01,
            quantile_samples: 10_000,
            scenarios: scenarios.iter().map(|s| s.to_string()).collect(),
            dataset: None,
            output_dir: PathBuf::from("out"),
        }
    }

    /// Parses TOML text; `origin` names the source in error messages.
    /// Relative `dataset`/`output_dir` paths resolve against `base`.
    pub fn from_toml(text: &str, origin: &str, base: Option<&Path>) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Parse { path: origin.to_string(), line, column, message: e.message().to_string() }
        })?;
        for key in table.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key `{key}`{}", suggestion(key, &KEYS))));
            }
        }
        let experiment = ExperimentKind::parse(
            table.get("experiment").ok_or_else(|| Error::Config("missing required key `experiment`".into()))?.as_str().ok_or_else(|| Error::Config("`experiment` must be a string".into()))?,
        )?;
        let seed = match table.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(_) => return Err(Error::Config("`seed` must be a nonnegative integer".into())),
            None => return Err(Error::Config("missing required key `seed`".into())),
        };
        let mut c = Self::defaults(experiment, seed);
        let resolve = |p: &str| match base {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        };
        for (key, v) in &table {
            match key.as_str() {
                "experiment" | "seed" => {}
                "K" => c.k = usize_of(key, v)?,
                "m" => c.m = usize_of(key, v)?,
                "eta" => c.eta = grid_of(key, v)?,
                "lambda" => c.lambda = grid_of(key, v)?,
                "gamma" => c.gamma = grid_of(key, v)?,
                "noise_variance" => c.noise_variance = float_of(key, v)?,
                "trials" => c.trials = usize_of(key, v)?,
                "replicates" => c.replicates = usize_of(key, v)?,
                "iterations" => c.iterations = usize_of(key, v)?,
                "seeds" => c.seeds = usize_of(key, v)?,
                "instances" => c.instances = usize_of(key, v)?,
                "zeta_bound" => c.zeta_bound = float_of(key, v)?,
                "quantile_samples" => c.quantile_samples = usize_of(key, v)?,
                "scenarios" => {
                    c.scenarios = v
                        .as_array()
                        .and_then(|a| a.iter().map(|x| x.as_str().map(String::from)).collect::<Option<Vec<_>>>())
                        .ok_or_else(|| Error::Config("`scenarios` must be an array of strings".into()))?
                }
                "dataset" => c.dataset = Some(resolve(str_of(key, v)?)),
                "output_dir" => c.output_dir = resolve(str_of(key, v)?),
                _ => unreachable!("keys checked above"),
            }
        }
        let diagnostics = validate_config(&c);
        if !diagnostics.is_empty() {
            return Err(Error::Config(diagnostics.join("; ")));
        }
        Ok(c)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn float_of(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("`{key}` must be a number"))),
    }
}

fn usize_of(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::Config(format!("`{key}` must be a nonnegative integer"))),
    }
}

fn str_of<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::Config(format!("`{key}` must be a string")))
}

fn grid_of(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Config(format!("`{key}` must be an array of numbers")))?
        .iter()
        .map(|x| float_of(key, x))
        .collect()
}

/// Every violated invariant, as human-readable diagnostics.
pub fn validate_config(c: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let uses = |kinds: &[ExperimentKind]| kinds.contains(&c.experiment);
    use ExperimentKind::*;
    let mut grid = |name: &str, g: &[f64], lo: f64, hi: f64, lo_open: bool| {
        if g.is_empty() {
            out.push(format!("`{name}` grid is empty"));
        } else if g.windows(2).any(|w| !(w[0] < w[1])) {
            out.push(format!("`{name}` grid not ascending"));
        }
        if g.iter().any(|x| !x.is_finite() || *x > hi || *x < lo || (lo_open && *x == lo)) {
            out.push(format!("`{name}` values must lie in {}{lo}, {hi}]", if lo_open { "(" } else { "[" }));
        }
    };
    if uses(&[MaskEtaSweepWaveform, MaskEtaSweepBeam, MisspecBound]) {
        grid("eta", &c.eta, 0.0, 1.0, false);
    }
    if uses(&[SpsaLambdaSweep]) {
        grid("lambda", &c.lambda, 0.0, f64::INFINITY, false);
    }
    if uses(&[SpsaLambdaSweep, Type1Bound]) {
        grid("gamma", &c.gamma, 0.0, 1.0, true);
        if c.gamma.contains(&1.0) {
            out.push("`gamma` values must be below 1".into());
        }
        if !(c.noise_variance > 0.0) {
            out.push("`noise_variance` must be positive".into());
        }
        if c.quantile_samples == 0 {
            out.push("`quantile_samples` must be positive".into());
        }
    }
    if c.experiment != SingleDatasetIrl {
        if c.k == 0 {
            out.push("`K` must be at least 1".into());
        }
        if c.m == 0 {
            out.push("`m` must be at least 1".into());
        }
        if c.scenarios.is_empty() {
            out.push("`scenarios` is empty".into());
        }
        for s in &c.scenarios {
            if let Err(e) = Scenario::parse(s) {
                out.push(e.to_string());
            }
        }
    } else if c.dataset.is_none() {
        out.push("`dataset` is required for single-dataset-irl".into());
    }
    if uses(&[SpsaLambdaSweep]) && (c.replicates == 0 || c.iterations == 0 || c.seeds == 0) {
        out.push("`replicates`, `iterations` and `seeds` must be positive".into());
    }
    if uses(&[Type1Bound]) && c.trials == 0 {
        out.push("`trials` must be positive".into());
    }
    if uses(&[MisspecBound]) {
        if c.instances == 0 {
            out.push("`instances` must be positive".into());
        }
        if !(c.zeta_bound >= 0.0) {
            out.push("`zeta_bound` must be nonnegative".into());
        }
    }
    out
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text, &path.display().to_string(), path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let c = ExperimentConfig::from_toml("experiment = \"type1-bound\"\nseed = 3\n", "t", None).unwrap();
        assert_eq!(c.k, 10);
        assert_eq!(c.trials, 2000);
        assert_eq!(c.gamma, vec![0.05, 0.1, 0.2]);
    }

    #[test]
    fn unknown_key_suggests() {
        let e = ExperimentConfig::from_toml("experiment = \"spsa-lambda-sweep\"\nseed = 1\nlamda = [1.0]\n", "t", None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("`lamda`") && e.contains("did you mean `lambda`"), "{e}");
    }

    #[test]
    fn descending_grid_rejected() {
        let e = ExperimentConfig::from_toml("experiment = \"mask-eta-sweep-beam\"\nseed = 1\neta = [0.5, 0.2]\n", "t", None)
            .unwrap_err()
            .to_string();
        assert!(e.contains("grid not ascending"), "{e}");
    }

    #[test]
    fn seed_required() {
        let e = ExperimentConfig::from_toml("experiment = \"type1-bound\"\n", "t", None).unwrap_err().to_string();
        assert!(e.contains("seed"));
    }

    #[test]
    fn parse_error_position() {
        match ExperimentConfig::from_toml("experiment = \"type1-bound\"\nseed = = 2\n", "cfg.toml", None) {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(path, "cfg.toml");
            }
            other => panic!("{other:?}"),
        }
    }
}
