//! The command implementations behind the binary.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use pareto_tuner_core::importance::{importance_analysis, Target};
use pareto_tuner_core::metrics::compare_runs;
use pareto_tuner_core::nsga2::evolve;
use pareto_tuner_core::search_space::{
    GUIDANCE_RESCALE, GUIDANCE_SCALE, INFERENCE_STEPS, NEGATIVE_PROMPT, POSITIVE_PROMPT, SEED,
};
use pareto_tuner_core::seed::derive_seed;
use pareto_tuner_core::{
    Candidate, Dispatcher, Evaluator, Gene, MemoryCache, ParamKind, RefPoint, RunArchive, SearchSpace, Surrogate,
};
use serde::Serialize;

use crate::archive_file::{archive_to_string, read_archive_dir, write_atomic, ArchiveError, ARCHIVE_EXTENSION};
use crate::config::{ConfigError, EvaluatorConfig, ExperimentConfig};
use crate::disk_cache::{CacheError, DiskCache};
use crate::pool::{ProcessPool, ThreadPool};
use crate::protocol::{Handshake, WireRequest, WireResponse};
use crate::report;
use crate::space_file::space_to_string;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "pareto-tuner manifest v1";

/// A failed command. Each kind maps to its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input files.
    #[error("{0}")]
    Input(String),
    /// The evaluator could not be started or a run could not finish.
    #[error("{0}")]
    Evaluator(String),
    /// Output could not be written.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Evaluator(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Command-line overrides for `run`.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Value of the backend environment variable, if set.
    pub backend: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunEntry {
    pub file: String,
    pub seed: u64,
    pub complete: bool,
    pub failure: Option<String>,
    pub evaluations: usize,
    pub backend_requests: usize,
    pub front_size: usize,
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub evaluator_id: String,
    pub runs: Vec<RunEntry>,
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

impl Manifest {
    pub fn all_complete(&self) -> bool {
        self.runs.iter().all(|r| r.complete)
    }
}

pub fn archive_file_name(index: usize) -> String {
    format!("run-{index:03}.{ARCHIVE_EXTENSION}")
}

/// Loads, overrides and validates a config file.
pub fn load_config(path: &Path, overrides: &RunOverrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(r) = overrides.repeats {
        cfg.repeats = r;
    }
    if let Some(s) = overrides.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &overrides.out {
        cfg.out_dir = o.clone();
    }
    cfg.apply_backend_override(overrides.backend.as_deref());
    cfg.validate()?;
    Ok(cfg)
}

enum Backend {
    Surrogate(ThreadPool<Surrogate>),
    External(ProcessPool),
}

impl Backend {
    fn evaluator(&mut self) -> &mut dyn Evaluator {
        match self {
            Backend::Surrogate(p) => p,
            Backend::External(p) => p,
        }
    }

    /// Namespace of persisted results; includes the surrogate constants since they change the
    /// answers.
    fn cache_namespace(&mut self, cfg: &ExperimentConfig) -> String {
        let mut id = self.evaluator().id();
        if let Backend::Surrogate(_) = self {
            id.push(' ');
            id.push_str(&serde_json::to_string(&cfg.surrogate).expect("config serializes"));
        }
        DiskCache::namespace(&id, &cfg.base_prompt)
    }
}

fn start_backend(cfg: &ExperimentConfig, space: &SearchSpace) -> Result<Backend, CliError> {
    match &cfg.evaluator {
        EvaluatorConfig::Surrogate => {
            let s = Surrogate::new(cfg.surrogate.clone(), space).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(Backend::Surrogate(ThreadPool::new(s, cfg.parallelism)))
        }
        EvaluatorConfig::External { .. } => {
            let spec = cfg.evaluator.backend_spec().expect("external evaluator");
            ProcessPool::spawn(spec, space.clone(), cfg.parallelism)
                .map(Backend::External)
                .map_err(|e| CliError::Evaluator(format!("cannot start evaluator: {e}")))
        }
    }
}

/// Runs every repeat of `cfg` and writes one archive per run plus the manifest.
///
/// Runs that fail part-way still write their (incomplete) archive; the manifest records the
/// failure and the caller reports it through the exit code.
pub fn run_experiment(cfg: &ExperimentConfig, log: &mut dyn Write) -> Result<Manifest, CliError> {
    let space = cfg.search_space()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_error(&cfg.out_dir))?;
    let mut backend = start_backend(cfg, &space)?;
    let mut disk = match &cfg.cache_dir {
        Some(dir) => Some(DiskCache::open(dir, &backend.cache_namespace(cfg))?),
        None => None,
    };
    let evaluator_id = backend.evaluator().id();
    let started_unix_ms = unix_ms();
    let clock = Instant::now();
    let mut runs = Vec::with_capacity(cfg.repeats);
    for i in 0..cfg.repeats {
        let seed = derive_seed(cfg.master_seed, i as u64);
        let nsga = cfg.nsga.to_config(seed);
        let run_start = unix_ms();
        let run_clock = Instant::now();
        let mut dispatcher = Dispatcher::with_cache(backend.evaluator(), MemoryCache::new(), cfg.retries);
        if let Some(d) = disk.as_mut() {
            dispatcher = dispatcher.persistent(d);
        }
        let mut archive = evolve(&space, &cfg.base_prompt, &mut dispatcher, &nsga, &mut ())
            .map_err(|e| CliError::Input(e.to_string()))?;
        let backend_requests = dispatcher.backend_requests();
        drop(dispatcher);
        archive.ref_point = cfg.reference;
        let file = archive_file_name(i);
        let path = cfg.out_dir.join(&file);
        write_atomic(&path, &archive_to_string(&archive)).map_err(io_error(&path))?;
        let entry = RunEntry {
            file,
            seed,
            complete: archive.complete,
            failure: archive.failure.clone(),
            evaluations: archive.records.len(),
            backend_requests,
            front_size: archive.final_front.len(),
            started_unix_ms: run_start,
            elapsed_ms: run_clock.elapsed().as_millis() as u64,
        };
        let _ = writeln!(
            log,
            "run {}/{}: {} evaluations, front of {}{}",
            i + 1,
            cfg.repeats,
            entry.evaluations,
            entry.front_size,
            entry.failure.as_deref().map(|f| format!(", FAILED: {f}")).unwrap_or_default()
        );
        runs.push(entry);
    }
    if let Some(e) = disk.as_ref().and_then(|d| d.write_error()) {
        let _ = writeln!(log, "warning: evaluation cache not fully written: {e}");
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        config: cfg.clone(),
        evaluator_id,
        runs,
        started_unix_ms,
        elapsed_ms: clock.elapsed().as_millis() as u64,
    };
    let path = cfg.out_dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&path, &json).map_err(io_error(&path))?;
    Ok(manifest)
}

fn load_archives(dir: &Path) -> Result<Vec<RunArchive>, CliError> {
    Ok(read_archive_dir(dir)?.into_iter().map(|(_, a)| a).collect())
}

fn write_outputs(out: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io_error(out))?;
    for (name, contents) in files {
        let path = out.join(name);
        write_atomic(&path, contents).map_err(io_error(&path))?;
    }
    Ok(())
}

/// Compares two archive directories. Returns the text summary; with `out`, also writes
/// `comparison.json`, `comparison.tsv` and `comparison.txt` there.
pub fn compare(a: &Path, b: &Path, reference: Option<RefPoint>, out: Option<&Path>) -> Result<String, CliError> {
    let archives_a = load_archives(a)?;
    let archives_b = load_archives(b)?;
    let report = compare_runs(&archives_a, &archives_b, reference).map_err(|e| CliError::Input(e.to_string()))?;
    let (la, lb) = (a.display().to_string(), b.display().to_string());
    let text = report::comparison_text(&report, &la, &lb);
    if let Some(out) = out {
        write_outputs(
            out,
            &[
                ("comparison.json", report::comparison_json(&report, &la, &lb)),
                ("comparison.tsv", report::comparison_tsv(&report)),
                ("comparison.txt", text.clone()),
            ],
        )?;
    }
    Ok(text)
}

#[derive(Debug, Clone)]
pub struct ImportanceOptions {
    pub target: Target,
    pub repeats: usize,
    pub budget: usize,
    pub seed: u64,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        Self { target: Target::Time, repeats: 10, budget: 10, seed: 0 }
    }
}

/// Importance analysis of an archive directory. Returns the bar chart; with `out`, also writes
/// `importance-<target>.json`, `-features.tsv`, `-groups.tsv` and `.txt` there.
pub fn importance(dir: &Path, opts: &ImportanceOptions, out: Option<&Path>) -> Result<String, CliError> {
    let archives = load_archives(dir)?;
    let r = importance_analysis(&archives, opts.target, opts.repeats, opts.budget, opts.seed)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let chart = report::importance_chart(&r);
    if let Some(out) = out {
        let t = opts.target.name();
        write_outputs(
            out,
            &[
                (&format!("importance-{t}.json"), report::importance_json(&r)),
                (&format!("importance-{t}-features.tsv"), report::importance_features_tsv(&r)),
                (&format!("importance-{t}-groups.tsv"), report::importance_groups_tsv(&r)),
                (&format!("importance-{t}.txt"), chart.clone()),
            ],
        )?;
    }
    Ok(chart)
}

pub fn space_dump(cfg: Option<&ExperimentConfig>) -> Result<String, CliError> {
    let space = match cfg {
        Some(c) => c.search_space()?,
        None => SearchSpace::default_space(),
    };
    Ok(space_to_string(&space))
}

/// Rebuilds the candidate a request was rendered from.
pub fn candidate_from_wire(req: &WireRequest, space: &SearchSpace) -> Result<Candidate, String> {
    let positive = req
        .positive_prompt
        .strip_prefix(req.base_prompt.as_str())
        .ok_or("positive prompt does not start with the base prompt")?;
    let positive = if req.base_prompt.is_empty() { positive } else { positive.strip_prefix(", ").unwrap_or(positive) };
    let genes = space
        .params()
        .iter()
        .map(|p| {
            Ok(match (p.name.as_str(), &p.kind) {
                (INFERENCE_STEPS, ParamKind::Integer { .. }) => Gene::Int(req.steps),
                (SEED, ParamKind::Integer { .. }) => Gene::Int(req.seed),
                (GUIDANCE_SCALE, ParamKind::Real { .. }) => Gene::Real(req.guidance_scale),
                (GUIDANCE_RESCALE, ParamKind::Real { .. }) => Gene::Real(req.guidance_rescale),
                (POSITIVE_PROMPT, ParamKind::TokenSubset { vocabulary }) => {
                    Gene::Mask(token_mask(positive, vocabulary)?)
                }
                (NEGATIVE_PROMPT, ParamKind::TokenSubset { vocabulary }) => {
                    Gene::Mask(token_mask(&req.negative_prompt, vocabulary)?)
                }
                (name, _) => return Err(format!("cannot serve parameter `{name}`")),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let c = Candidate::new(genes);
    space.validate(&c).map_err(|e| e.to_string())?;
    Ok(c)
}

fn token_mask(list: &str, vocabulary: &[String]) -> Result<Vec<bool>, String> {
    let mut mask = vec![false; vocabulary.len()];
    if list.is_empty() {
        return Ok(mask);
    }
    for token in list.split(", ") {
        let i = vocabulary.iter().position(|v| v == token).ok_or_else(|| format!("unknown token {token:?}"))?;
        mask[i] = true;
    }
    Ok(mask)
}

/// Answers protocol requests with the surrogate until `input` closes.
pub fn serve_surrogate(cfg: &ExperimentConfig, input: impl BufRead, mut output: impl Write) -> Result<(), CliError> {
    let space = cfg.search_space()?;
    let surrogate = Surrogate::new(cfg.surrogate.clone(), &space).map_err(|e| CliError::Input(e.to_string()))?;
    let io = |e: std::io::Error| CliError::Io(format!("stdout: {e}"));
    writeln!(output, "{}", Handshake::v1(true).to_line()).map_err(io)?;
    output.flush().map_err(io)?;
    for line in input.lines() {
        let line = line.map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match WireRequest::parse(&line) {
            Ok(req) => match candidate_from_wire(&req, &space).and_then(|c| surrogate.evaluate(&c)) {
                Ok(o) => WireResponse::ok(req.id, o.time_ms, o.quality),
                Err(e) => WireResponse::error(req.id, e),
            },
            Err(e) => WireResponse::error("", format!("malformed request: {e}")),
        };
        writeln!(output, "{}", response.to_line()).map_err(io)?;
        output.flush().map_err(io)?;
    }
    Ok(())
}
