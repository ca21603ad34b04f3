//! Report files for `compare` and `importance`.
//!
//! Every file starts with a schema line: `#pareto-tuner <kind> v1` for tables and text, a
//! `schema` field for JSON. Numbers use the shortest text that parses back to the same value,
//! so reports are byte-identical for identical inputs.

use std::fmt::Write as _;

use pareto_tuner_core::importance::ImportanceReport;
use pareto_tuner_core::metrics::{ApproachSummary, MeanRatio, RunStats};
use pareto_tuner_core::ComparisonReport;
use serde::Serialize;

pub const COMPARISON_SCHEMA: &str = "pareto-tuner comparison v1";
pub const IMPORTANCE_SCHEMA: &str = "pareto-tuner importance v1";

const BAR_WIDTH: usize = 40;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

/// The full report as JSON.
pub fn comparison_json(r: &ComparisonReport, a_label: &str, b_label: &str) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        a_label: &'a str,
        b_label: &'a str,
        #[serde(flatten)]
        report: &'a ComparisonReport,
    }
    let body = Body { a_label, b_label, report: r };
    let mut s =
        serde_json::to_string_pretty(&Versioned { schema: COMPARISON_SCHEMA, body: &body }).expect("report serializes");
    s.push('\n');
    s
}

/// One row per run and side, for plotting distributions.
pub fn comparison_tsv(r: &ComparisonReport) -> String {
    let mut out = format!("#{COMPARISON_SCHEMA}\n");
    let _ = writeln!(out, "#ref_point\tquality_loss={}\ttime_ms={}", r.ref_point.quality_loss, r.ref_point.time_ms);
    out.push_str("side\trun\tbest_time_ms\tbest_quality\thypervolume\tfront_size\n");
    for (side, s) in [("a", &r.a), ("b", &r.b)] {
        for (i, run) in s.runs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{side}\t{i}\t{}\t{}\t{}\t{}",
                run.best_time_ms, run.best_quality, run.hypervolume, run.front_size
            );
        }
    }
    out
}

/// Human-readable distributions and ratios.
pub fn comparison_text(r: &ComparisonReport, a_label: &str, b_label: &str) -> String {
    let mut out = format!("#{COMPARISON_SCHEMA}\n");
    let _ = writeln!(out, "a: {a_label} ({} runs)", r.a.runs.len());
    let _ = writeln!(out, "b: {b_label} ({} runs)", r.b.runs.len());
    let _ = writeln!(out, "reference point: quality_loss {} time_ms {}", r.ref_point.quality_loss, r.ref_point.time_ms);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<14} {:>4} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "metric", "side", "mean", "min", "q1", "median", "q3", "max"
    );
    type Pick = fn(&ApproachSummary) -> &RunStats;
    let rows: [(&str, Pick, &MeanRatio); 3] = [
        ("best_time_ms", |s| &s.best_time_ms, &r.best_time),
        ("best_quality", |s| &s.best_quality, &r.best_quality),
        ("hypervolume", |s| &s.hypervolume, &r.hypervolume),
    ];
    for (name, pick, _) in &rows {
        for (side, s) in [("a", &r.a), ("b", &r.b)] {
            let st = pick(s);
            let _ = writeln!(
                out,
                "{name:<14} {side:>4} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                st.mean, st.min, st.q1, st.median, st.q3, st.max
            );
        }
    }
    out.push('\n');
    for (name, _, ratio) in &rows {
        let _ = writeln!(
            out,
            "{name:<14} a/b {:.4}  b/a {:.4}  a vs b {:+.2}%",
            ratio.a_over_b, ratio.b_over_a, ratio.percent_a_over_b
        );
    }
    out
}

fn group_of(feature: &str) -> &str {
    feature.split_once(':').map_or(feature, |(g, _)| g)
}

/// `feature  group  mean  sd  min  max`, in column order.
pub fn importance_features_tsv(r: &ImportanceReport) -> String {
    let mut out =
        format!("#{IMPORTANCE_SCHEMA} features target={} repeats={} rows={}\n", r.target.name(), r.repeats(), r.n_rows);
    out.push_str("feature\tgroup\tmean_mdi\tsd\tmin\tmax\n");
    for (f, s) in r.features.iter().zip(&r.feature_summary) {
        let _ = writeln!(out, "{f}\t{}\t{}\t{}\t{}\t{}", group_of(f), s.mean, s.sd, s.min, s.max);
    }
    out
}

/// `group  mean  sd  min  max`; a group's value is the sum of its features' importances.
pub fn importance_groups_tsv(r: &ImportanceReport) -> String {
    let mut out =
        format!("#{IMPORTANCE_SCHEMA} groups target={} repeats={} rows={}\n", r.target.name(), r.repeats(), r.n_rows);
    out.push_str("group\tmean_mdi\tsd\tmin\tmax\n");
    for (g, s) in r.groups.iter().zip(&r.group_summary) {
        let _ = writeln!(out, "{g}\t{}\t{}\t{}\t{}", s.mean, s.sd, s.min, s.max);
    }
    out
}

pub fn importance_json(r: &ImportanceReport) -> String {
    let mut s =
        serde_json::to_string_pretty(&Versioned { schema: IMPORTANCE_SCHEMA, body: r }).expect("report serializes");
    s.push('\n');
    s
}

fn bars(out: &mut String, names: &[String], means: &[f64], sds: &[f64]) {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0);
    let top = means.iter().copied().fold(0.0, f64::max);
    for i in order {
        let len = if top > 0.0 { (means[i] / top * BAR_WIDTH as f64).round() as usize } else { 0 };
        let _ = writeln!(out, "{:<width$}  {:<BAR_WIDTH$}  {:.4} ± {:.4}", names[i], "#".repeat(len), means[i], sds[i]);
    }
}

/// Bar charts of mean importance, features first, then groups.
pub fn importance_chart(r: &ImportanceReport) -> String {
    let mut out = format!("#{IMPORTANCE_SCHEMA} chart\n");
    let _ = writeln!(
        out,
        "mean decrease in impurity for {} ({} repeats, {} rows)\n",
        r.target.name(),
        r.repeats(),
        r.n_rows
    );
    let means: Vec<f64> = r.feature_summary.iter().map(|s| s.mean).collect();
    let sds: Vec<f64> = r.feature_summary.iter().map(|s| s.sd).collect();
    bars(&mut out, &r.features, &means, &sds);
    out.push_str("\nby parameter\n\n");
    let means: Vec<f64> = r.group_summary.iter().map(|s| s.mean).collect();
    let sds: Vec<f64> = r.group_summary.iter().map(|s| s.sd).collect();
    bars(&mut out, &r.groups, &means, &sds);
    if r.uniform_fallback.iter().any(|&u| u) {
        out.push_str("\nnote: some repeats made no split; their importances are uniform\n");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
