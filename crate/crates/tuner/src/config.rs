//! Experiment configuration (TOML).
//!
//! ```toml
//! base_prompt = "two people and a bus"
//! repeats = 15
//! master_seed = 0
//! parallelism = 1
//! retries = 1
//! out_dir = "runs"
//! cache_dir = ".cache"            # optional on-disk evaluation cache
//!
//! [nsga]
//! population_size = 25
//! generations = 50
//! mutation_rate = 0.2
//! crossover_rate = 0.2
//! mode = "pareto"                 # or "weighted_single"
//! weights = { w_quality = 0.001, w_time = -1000.0 }
//!
//! [evaluator]
//! kind = "surrogate"              # or "external"
//! # command = ["python", "-m", "sdyolo_adapter"]
//! # handshake_timeout_s = 600
//! # request_timeout_s = 600
//!
//! [surrogate]                     # optional overrides of the surrogate constants
//! noise_seed = 1
//!
//! [space]                         # optional; defaults to the built-in space
//! # file = "space.toml"
//! # positive_vocabulary = "positive.txt"
//! # negative_vocabulary = "negative.txt"
//!
//! [reference]
//! quality_loss = 1.0
//! time_ms = 50000.0
//! ```
//!
//! Relative paths are resolved against the config file's directory. Every section and key is
//! optional; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use pareto_tuner_core::{Mode, NsgaConfig, RefPoint, ScalingWeights, SearchSpace, SurrogateConfig};
use serde::{Deserialize, Serialize};

use crate::protocol::BackendSpec;
use crate::space_file;

pub const BACKEND_ENV: &str = "PARETO_TUNER_BACKEND";
pub const DEFAULT_BASE_PROMPT: &str = "two people and a bus";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_prompt: String,
    pub repeats: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub retries: u32,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub nsga: NsgaSection,
    pub evaluator: EvaluatorConfig,
    pub surrogate: SurrogateConfig,
    pub space: SpaceSection,
    pub reference: RefPoint,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base_prompt: DEFAULT_BASE_PROMPT.into(),
            repeats: 15,
            master_seed: 0,
            parallelism: 1,
            retries: 1,
            out_dir: PathBuf::from("runs"),
            cache_dir: None,
            nsga: NsgaSection::default(),
            evaluator: EvaluatorConfig::Surrogate,
            surrogate: SurrogateConfig::default(),
            space: SpaceSection::default(),
            reference: RefPoint::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsgaSection {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub mode: Mode,
    pub weights: ScalingWeights,
}

impl Default for NsgaSection {
    fn default() -> Self {
        let d = NsgaConfig::default();
        Self {
            population_size: d.population_size,
            generations: d.generations,
            mutation_rate: d.mutation_rate,
            crossover_rate: d.crossover_rate,
            mode: d.mode,
            weights: d.weights,
        }
    }
}

impl NsgaSection {
    pub fn to_config(&self, master_seed: u64) -> NsgaConfig {
        NsgaConfig {
            population_size: self.population_size,
            generations: self.generations,
            mutation_rate: self.mutation_rate,
            crossover_rate: self.crossover_rate,
            weights: self.weights,
            mode: self.mode,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    Surrogate,
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout_s")]
        handshake_timeout_s: f64,
        #[serde(default = "default_timeout_s")]
        request_timeout_s: f64,
    },
}

fn default_timeout_s() -> f64 {
    600.0
}

impl EvaluatorConfig {
    pub fn backend_spec(&self) -> Option<BackendSpec> {
        match self {
            EvaluatorConfig::Surrogate => None,
            EvaluatorConfig::External { command, handshake_timeout_s, request_timeout_s } => Some(BackendSpec {
                command: command.clone(),
                handshake_timeout: Duration::from_secs_f64(*handshake_timeout_s),
                request_timeout: Duration::from_secs_f64(*request_timeout_s),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    /// A full space definition in the format printed by `space dump`.
    pub file: Option<PathBuf>,
    /// One token per line; replaces the built-in positive vocabulary.
    pub positive_vocabulary: Option<PathBuf>,
    pub negative_vocabulary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        for p in [
            &mut cfg.cache_dir,
            &mut cfg.space.file,
            &mut cfg.space.positive_vocabulary,
            &mut cfg.space.negative_vocabulary,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path)
    }

    /// Replaces the evaluator with an external command when `value` is set and non-blank.
    /// The command is split on whitespace.
    pub fn apply_backend_override(&mut self, value: Option<&str>) {
        let Some(command) = value.map(|v| v.split_whitespace().map(String::from).collect::<Vec<_>>()) else {
            return;
        };
        if command.is_empty() {
            return;
        }
        let (handshake_timeout_s, request_timeout_s) = match &self.evaluator {
            EvaluatorConfig::External { handshake_timeout_s, request_timeout_s, .. } => {
                (*handshake_timeout_s, *request_timeout_s)
            }
            EvaluatorConfig::Surrogate => (default_timeout_s(), default_timeout_s()),
        };
        self.evaluator = EvaluatorConfig::External { command, handshake_timeout_s, request_timeout_s };
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.repeats == 0 {
            return invalid("repeats must be at least 1");
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1");
        }
        self.nsga.to_config(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let EvaluatorConfig::External { command, handshake_timeout_s, request_timeout_s } = &self.evaluator {
            if command.is_empty() {
                return invalid("external evaluator needs a command");
            }
            if !(handshake_timeout_s.is_finite()
                && *handshake_timeout_s > 0.0
                && request_timeout_s.is_finite()
                && *request_timeout_s > 0.0)
            {
                return invalid("timeouts must be positive");
            }
        }
        let r = self.reference;
        if !(r.quality_loss.is_finite() && r.time_ms.is_finite()) {
            return invalid("reference point must be finite");
        }
        Ok(())
    }

    /// The search space: the space file if given, else the default numeric parameters with the
    /// configured or built-in vocabularies.
    pub fn search_space(&self) -> Result<SearchSpace, ConfigError> {
        if let Some(path) = &self.space.file {
            if self.space.positive_vocabulary.is_some() || self.space.negative_vocabulary.is_some() {
                return Err(ConfigError::Invalid("give either a space file or vocabulary files, not both".into()));
            }
            return space_file::load_space(path);
        }
        let read = |p: &Option<PathBuf>, default: &[&str]| -> Result<Vec<String>, ConfigError> {
            match p {
                Some(p) => space_file::load_vocabulary(p),
                None => Ok(default.iter().map(|s| s.to_string()).collect()),
            }
        };
        use pareto_tuner_core::search_space::{DEFAULT_NEGATIVE_TOKENS, DEFAULT_POSITIVE_TOKENS};
        let pos = read(&self.space.positive_vocabulary, &DEFAULT_POSITIVE_TOKENS)?;
        let neg = read(&self.space.negative_vocabulary, &DEFAULT_NEGATIVE_TOKENS)?;
        SearchSpace::with_vocabularies(&pos, &neg).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
