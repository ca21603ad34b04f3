//! Line-oriented run archive files.
//!
//! ```text
//! #pareto-tuner archive v1
//! #config {"base_prompt":...,"evaluator_id":...,"nsga":{...},"ref_point":{...},"space":{...},...}
//! #columns eval generation time_ms quality candidate
//! eval\t<generation>\t<time_ms>\t<quality>\t<candidate>
//! ...
//! #columns front crowding time_ms quality candidate
//! front\t<crowding>\t<time_ms>\t<quality>\t<candidate>
//! ...
//! ```
//!
//! Fields are tab-separated. Floats use the shortest text that parses back to the same value
//! (`inf` for an unbounded crowding distance). Candidates use the lossless gene text of
//! [`Candidate::to_text`]. Wall-clock stamps are not stored, so identical runs give identical
//! files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pareto_tuner_core::{
    Candidate, EvaluationRecord, Individual, NsgaConfig, ObjectiveVector, RefPoint, RunArchive, SearchSpace,
};
use serde::{Deserialize, Serialize};

pub const ARCHIVE_HEADER: &str = "#pareto-tuner archive v1";
pub const ARCHIVE_EXTENSION: &str = "archive";
const EVAL_COLUMNS: &str = "#columns eval generation time_ms quality candidate";
const FRONT_COLUMNS: &str = "#columns front crowding time_ms quality candidate";

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{0}: no archive files found")]
    Empty(PathBuf),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    base_prompt: String,
    evaluator_id: String,
    nsga: NsgaConfig,
    ref_point: RefPoint,
    complete: bool,
    failure: Option<String>,
    space: SearchSpace,
}

pub fn archive_to_string(a: &RunArchive) -> String {
    let header = Header {
        base_prompt: a.base_prompt.clone(),
        evaluator_id: a.evaluator_id.clone(),
        nsga: a.config.clone(),
        ref_point: a.ref_point,
        complete: a.complete,
        failure: a.failure.clone(),
        space: a.space.clone(),
    };
    let mut out = String::new();
    out.push_str(ARCHIVE_HEADER);
    out.push('\n');
    out.push_str("#config ");
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    out.push_str(EVAL_COLUMNS);
    out.push('\n');
    for r in &a.records {
        let _ = writeln!(out, "eval\t{}\t{}\t{}\t{}", r.generation, r.time_ms, r.quality, r.candidate.to_text());
    }
    out.push_str(FRONT_COLUMNS);
    out.push('\n');
    for i in &a.final_front {
        let _ = writeln!(
            out,
            "front\t{}\t{}\t{}\t{}",
            i.crowding,
            i.objectives.time_ms,
            i.objectives.quality,
            i.candidate.to_text()
        );
    }
    out
}

/// Parses archive text; `path` is only used in error messages.
pub fn parse_archive(text: &str, path: &Path) -> Result<RunArchive, ArchiveError> {
    let bad = |line: usize, message: String| ArchiveError::Format { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    match lines.next() {
        Some((_, l)) if l == ARCHIVE_HEADER => {}
        Some((n, l)) => return Err(bad(n, format!("expected {ARCHIVE_HEADER:?}, found {l:?}"))),
        None => return Err(bad(1, "empty file".into())),
    }
    let header: Header = match lines.next() {
        Some((n, l)) => {
            let json = l.strip_prefix("#config ").ok_or_else(|| bad(n, "expected a #config line".into()))?;
            serde_json::from_str(json).map_err(|e| bad(n, format!("bad config: {e}")))?
        }
        None => return Err(bad(2, "missing #config line".into())),
    };

    let mut records = Vec::new();
    let mut final_front = Vec::new();
    let mut section = None;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            section = match line {
                EVAL_COLUMNS if section.is_none() => Some("eval"),
                FRONT_COLUMNS if section == Some("eval") => Some("front"),
                _ => return Err(bad(n, format!("unexpected line {line:?}"))),
            };
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(n, format!("expected 5 tab-separated fields, found {}", fields.len())));
        }
        let float = |i: usize, what: &str| -> Result<f64, ArchiveError> {
            fields[i].parse::<f64>().map_err(|_| bad(n, format!("bad {what} {:?}", fields[i])))
        };
        let time_ms = float(2, "time_ms")?;
        let quality = float(3, "quality")?;
        let candidate = Candidate::from_text(fields[4]).map_err(|e| bad(n, format!("bad candidate: {e}")))?;
        header.space.validate(&candidate).map_err(|e| bad(n, format!("candidate outside the space: {e}")))?;
        match (section, fields[0]) {
            (Some("eval"), "eval") => {
                let generation = fields[1].parse().map_err(|_| bad(n, format!("bad generation {:?}", fields[1])))?;
                records.push(EvaluationRecord {
                    generation,
                    candidate,
                    time_ms,
                    quality,
                    evaluator_id: header.evaluator_id.clone(),
                    wall_clock_ms: None,
                });
            }
            (Some("front"), "front") => {
                let mut ind = Individual::new(candidate, ObjectiveVector::new(time_ms, quality));
                ind.rank = 0;
                ind.crowding = float(1, "crowding")?;
                final_front.push(ind);
            }
            (_, kind) => return Err(bad(n, format!("unexpected {kind:?} line here"))),
        }
    }
    if section != Some("front") {
        return Err(bad(text.lines().count(), "missing front section".into()));
    }
    Ok(RunArchive {
        config: header.nsga,
        space: header.space,
        base_prompt: header.base_prompt,
        evaluator_id: header.evaluator_id,
        ref_point: header.ref_point,
        records,
        final_front,
        complete: header.complete,
        failure: header.failure,
    })
}

pub fn read_archive(path: &Path) -> Result<RunArchive, ArchiveError> {
    let text = std::fs::read_to_string(path).map_err(|source| ArchiveError::Io { path: path.into(), source })?;
    parse_archive(&text, path)
}

/// Reads every `*.archive` file in `dir`, in file-name order.
pub fn read_archive_dir(dir: &Path) -> Result<Vec<(PathBuf, RunArchive)>, ArchiveError> {
    let io = |source| ArchiveError::Io { path: dir.into(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == ARCHIVE_EXTENSION))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ArchiveError::Empty(dir.into()));
    }
    paths.into_iter().map(|p| read_archive(&p).map(|a| (p, a))).collect()
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
