//! The JSON run configuration.
//!
//! ```json
//! {
//!   "model": {"rates": {"kind": "constant", "birth": 1.0, "death": 1.25}, "alpha": 0.4, "beta": 0.3},
//!   "task": {"start": 0, "times": [0.5, 2.0]},
//!   "numerics": {"truncation": {"max_level": 4096}},
//!   "output": {"format": "json"}
//! }
//! ```
//!
//! Every block except `model` is optional and unknown fields are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::first_catastrophe::SingleType;
use crate::model::{ModelSpec, TruncationPolicy};
use crate::transient::{InversionSettings, QuadratureSettings};

use super::output::Format;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_REPLICATIONS: usize = 100_000;
pub const DEFAULT_LEVELS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TransitionMethod {
    Formula,
    Direct,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Start level for single-start commands (default 0).
    pub start: Option<usize>,
    /// Start levels for `catastrophe` (default `[start]`).
    pub starts: Option<Vec<usize>>,
    /// Times for `transition` and `density` (default `[1.0]`).
    pub times: Option<Vec<f64>>,
    /// Levels `n` reported by `transition` and `resolvent` (default `0..=10`).
    pub levels: Option<Vec<usize>>,
    /// Frequency for `resolvent` (default `1 + 0i`).
    pub frequency: Option<FrequencyConfig>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<TransitionMethod>,
    /// Use the single-type closed forms in `catastrophe`.
    pub single_type: Option<bool>,
}

impl TaskConfig {
    pub fn start(&self) -> usize {
        self.start.unwrap_or(0)
    }

    pub fn starts(&self) -> Vec<usize> {
        self.starts.clone().unwrap_or_else(|| vec![self.start()])
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| vec![1.0])
    }

    pub fn levels(&self) -> Vec<usize> {
        self.levels.clone().unwrap_or_else(|| (0..=DEFAULT_LEVELS).collect())
    }

    pub fn frequency(&self) -> FrequencyConfig {
        self.frequency.unwrap_or(FrequencyConfig { re: 1.0, im: 0.0 })
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(DEFAULT_REPLICATIONS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn method(&self) -> TransitionMethod {
        self.method.unwrap_or(TransitionMethod::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub truncation: TruncationPolicy,
    pub inversion: InversionSettings,
    pub quadrature: QuadratureSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_level: Option<usize>,
    pub method: Option<TransitionMethod>,
    pub single_type: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.task.seed = Some(seed);
        }
        if let Some(reps) = o.replications {
            self.task.replications = Some(reps);
        }
        if let Some(format) = o.format {
            self.output.format = Some(format);
        }
        if let Some(out) = &o.out {
            self.output.path = Some(out.clone());
        }
        if let Some(tol) = o.tol {
            self.numerics.truncation.rel_tol = tol;
        }
        if let Some(max_level) = o.max_level {
            let t = &mut self.numerics.truncation;
            t.max_level = max_level;
            // keep the default start level below a small cap
            t.initial_level = t.initial_level.min(max_level / 2).max(8);
        }
        if let Some(method) = o.method {
            self.task.method = Some(method);
        }
        if o.single_type {
            self.task.single_type = Some(true);
        }
    }

    pub fn single_type(&self) -> Option<(SingleType, f64)> {
        match (self.model.alpha, self.model.beta) {
            (a, b) if b == 0.0 && a > 0.0 => Some((SingleType::AlphaOnly, a)),
            (a, b) if a == 0.0 && b > 0.0 => Some((SingleType::BetaOnly, b)),
            _ => None,
        }
    }
}
