//! End-to-end runs of the `pareto-tuner` binary.

use std::path::Path;
use std::process::{Command, Output};

use pareto_tuner::archive_file::read_archive;
use pareto_tuner::space_file::parse_space;
use pareto_tuner_core::SearchSpace;

const BIN: &str = env!("CARGO_BIN_EXE_pareto-tuner");

fn tuner(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).env_remove("PARETO_TUNER_BACKEND").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "repeats = 2\n[nsga]\ngenerations = 4\n";

fn archive_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn run_writes_one_archive_per_repeat_plus_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let o = tuner(dir.path(), &["run", "--config", "c.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(archive_names(&dir.path().join("runs")), ["manifest.json", "run-000.archive", "run-001.archive"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("runs/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "pareto-tuner manifest v1");
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let o = tuner(dir.path(), &["run", "--config", "c.toml", "--repeats", "1", "--seed", "5", "--out", "elsewhere"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(archive_names(&dir.path().join("elsewhere")), ["manifest.json", "run-000.archive"]);
}

#[test]
fn default_run_stays_within_the_evaluation_budget() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "repeats = 2\n");
    let o = tuner(dir.path(), &["run", "--config", "c.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..2 {
        let a = read_archive(&dir.path().join(format!("runs/run-{i:03}.archive"))).unwrap();
        assert!(a.complete);
        assert!(a.records.len() <= 25 + 25 * 50, "{}", a.records.len());
    }
}

#[test]
fn identical_sets_compare_with_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    assert!(tuner(dir.path(), &["run", "--config", "c.toml"]).status.success());
    let o = tuner(dir.path(), &["compare", "--a", "runs", "--b", "runs", "--out", "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report/comparison.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "pareto-tuner comparison v1");
    for metric in ["best_time", "best_quality", "hypervolume"] {
        assert_eq!(json[metric]["a_over_b"], 1.0);
        assert_eq!(json[metric]["b_over_a"], 1.0);
    }
    let tsv = std::fs::read_to_string(dir.path().join("report/comparison.tsv")).unwrap();
    assert!(tsv.starts_with("#pareto-tuner comparison v1\n"));
    assert_eq!(tsv.lines().filter(|l| l.starts_with("a\t") || l.starts_with("b\t")).count(), 4);
}

#[test]
fn reference_point_flags_override_the_declared_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    assert!(tuner(dir.path(), &["run", "--config", "c.toml"]).status.success());
    let o = tuner(dir.path(), &["compare", "--a", "runs", "--b", "runs", "--ref-quality", "1", "--ref-time", "20000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("time_ms 20000"));
    let o = tuner(dir.path(), &["compare", "--a", "runs", "--b", "runs", "--ref-time", "20000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mixed_reference_points_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", SMALL);
    write(
        dir.path(),
        "b.toml",
        &format!("out_dir = \"runs-b\"\n{SMALL}[reference]\nquality_loss = 1.0\ntime_ms = 60000.0\n"),
    );
    assert!(tuner(dir.path(), &["run", "--config", "a.toml"]).status.success());
    assert!(tuner(dir.path(), &["run", "--config", "b.toml"]).status.success());
    let o = tuner(dir.path(), &["compare", "--a", "runs", "--b", "runs-b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reference"), "{}", stderr(&o));
}

#[test]
fn malformed_archive_error_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    assert!(tuner(dir.path(), &["run", "--config", "c.toml"]).status.success());
    let path = dir.path().join("runs/run-001.archive");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "eval\t0\tfast\t0.5\ti:1";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = tuner(dir.path(), &["compare", "--a", "runs", "--b", "runs"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run-001.archive:6:"), "{}", stderr(&o));
}

#[test]
fn importance_with_fixed_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "repeats = 1\n[nsga]\ngenerations = 3\n");
    assert!(tuner(dir.path(), &["run", "--config", "c.toml"]).status.success());
    let args = ["importance", "--in", "runs", "--target", "quality", "--repeats", "1", "--budget", "2", "--seed", "3"];
    let first = tuner(dir.path(), &[&args[..], &["--out", "r1"]].concat());
    assert!(first.status.success(), "{}", stderr(&first));
    let second = tuner(dir.path(), &[&args[..], &["--out", "r2"]].concat());
    assert_eq!(first.stdout, second.stdout);
    for f in [
        "importance-quality-features.tsv",
        "importance-quality-groups.tsv",
        "importance-quality.json",
        "importance-quality.txt",
    ] {
        let a = std::fs::read(dir.path().join("r1").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("r2").join(f)).unwrap(), "{f}");
        assert!(
            a.starts_with(b"#pareto-tuner importance v1")
                || a.starts_with(b"{\n  \"schema\": \"pareto-tuner importance v1\""),
            "{f}"
        );
    }
    let tsv = std::fs::read_to_string(dir.path().join("r1/importance-quality-features.tsv")).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("guidance_rescale\tguidance_rescale\t")));
}

#[test]
fn space_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = tuner(dir.path(), &["space", "dump"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# pareto-tuner space v1\n"));
    assert_eq!(parse_space(&text, Path::new("-")).unwrap(), SearchSpace::default_space());
}

#[test]
fn custom_vocabulary_and_space_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pos.txt", "# positive\nphotograph\nsharp focus\n");
    write(dir.path(), "c.toml", &format!("{SMALL}[space]\npositive_vocabulary = \"pos.txt\"\n"));
    let o = tuner(dir.path(), &["space", "dump", "--config", "c.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("vocabulary = [\"photograph\", \"sharp focus\"]"), "{text}");
    write(dir.path(), "space.toml", &text);
    write(dir.path(), "d.toml", &format!("out_dir = \"runs-d\"\n{SMALL}[space]\nfile = \"space.toml\"\n"));
    let o = tuner(dir.path(), &["run", "--config", "d.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_archive(&dir.path().join("runs-d/run-000.archive")).unwrap();
    assert_eq!(a.space, parse_space(&text, Path::new("-")).unwrap());
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in ["repeats = 0\n", "[nsga]\nmutation_rate = 1.5\n", "unknown_key = 1\n", "repeats = \"many\"\n"]
        .iter()
        .enumerate()
    {
        let name = format!("c{i}.toml");
        write(dir.path(), &name, text);
        let o = tuner(dir.path(), &["run", "--config", &name]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
    }
    let o = tuner(dir.path(), &["run", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluator_spawn_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", SMALL);
    let o = Command::new(BIN)
        .current_dir(dir.path())
        .args(["run", "--config", "c.toml"])
        .env("PARETO_TUNER_BACKEND", "/nonexistent/backend --flag")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("/nonexistent/backend --flag"));
}

#[test]
fn failing_evaluator_exits_3_and_records_the_failure() {
    let dir = tempfile::tempdir().unwrap();
    let script = r#"echo '{"protocol":"pareto-tuner","version":"1","parallel_safe":false}'
while IFS= read -r line; do
  id=$(printf '%s\n' "$line" | sed 's/^{"id":"\([^"]*\)".*/\1/')
  printf '{"id":"%s","error":"no GPU"}\n' "$id"
done"#;
    write(dir.path(), "backend.sh", script);
    write(
        dir.path(),
        "c.toml",
        &format!(
            "{SMALL}[evaluator]\nkind = \"external\"\ncommand = [\"sh\", \"backend.sh\"]\nrequest_timeout_s = 5\n"
        ),
    );
    let o = tuner(dir.path(), &["run", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let a = read_archive(&dir.path().join("runs/run-000.archive")).unwrap();
    assert!(!a.complete);
    assert!(a.failure.unwrap().contains("no GPU"));
    let manifest = std::fs::read_to_string(dir.path().join("runs/manifest.json")).unwrap();
    assert!(manifest.contains("no GPU"));
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "blocker", "");
    write(dir.path(), "c.toml", "repeats = 1\nout_dir = \"blocker/runs\"\n[nsga]\ngenerations = 1\n");
    let o = tuner(dir.path(), &["run", "--config", "c.toml"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn serve_surrogate_speaks_the_protocol() {
    use std::io::Write;
    let mut child = Command::new(BIN)
        .arg("serve-surrogate")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let req = r#"{"id":"x","steps":50,"guidance_scale":7.5,"guidance_rescale":0.7,"seed":7,"positive_prompt":"two people and a bus, photograph","negative_prompt":"sketch","base_prompt":"two people and a bus"}"#;
    let bad = r#"{"id":"y","steps":50,"guidance_scale":7.5,"guidance_rescale":0.7,"seed":7,"positive_prompt":"two people and a bus, dragon","negative_prompt":"","base_prompt":"two people and a bus"}"#;
    writeln!(child.stdin.as_mut().unwrap(), "{req}\n{bad}").unwrap();
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], r#"{"protocol":"pareto-tuner","version":"1","parallel_safe":true}"#);
    assert!(lines[1].starts_with(r#"{"id":"x","time_ms":"#));
    assert!(lines[2].starts_with(r#"{"id":"y","error":"unknown token \"dragon\""#), "{}", lines[2]);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["pareto.toml", "quality-only.toml", "external.toml"] {
        let cfg = pareto_tuner::config::ExperimentConfig::load(&dir.join(name)).unwrap();
        cfg.validate().unwrap();
        cfg.search_space().unwrap();
    }
}
