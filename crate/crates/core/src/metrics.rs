//! Pareto fronts, 2-D hypervolume and across-repeat statistics.
//!
//! Hypervolume works in a minimization frame: the quality axis is `1 - quality` and the time
//! axis is milliseconds. The default reference point is `(1, 50000)`.

use alloc::vec::Vec;

use crate::evaluation::EvaluationRecord;
use crate::nsga2::{ObjectiveVector, RunArchive};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("statistics of an empty sample")]
    EmptySample,
    #[error("no archives on side {0}")]
    NoArchives(char),
    #[error("archive {index} on side {side} has an empty final front")]
    EmptyFront { side: char, index: usize },
    #[error("archives use different hypervolume reference points")]
    MismatchedRefPoints,
}

/// One point in the minimization frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HvPoint {
    pub quality_loss: f64,
    pub time_ms: f64,
}

impl HvPoint {
    pub fn new(quality_loss: f64, time_ms: f64) -> Self {
        Self { quality_loss, time_ms }
    }

    pub fn weakly_dominates(&self, other: &HvPoint) -> bool {
        self.quality_loss <= other.quality_loss && self.time_ms <= other.time_ms
    }

    pub fn dominates(&self, other: &HvPoint) -> bool {
        self.weakly_dominates(other) && self != other
    }
}

impl From<ObjectiveVector> for HvPoint {
    fn from(o: ObjectiveVector) -> Self {
        Self::new(1.0 - o.quality, o.time_ms)
    }
}

impl From<&EvaluationRecord> for HvPoint {
    fn from(r: &EvaluationRecord) -> Self {
        HvPoint::from(r.objectives())
    }
}

/// The worst corner of the hypervolume box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefPoint {
    pub quality_loss: f64,
    pub time_ms: f64,
}

impl RefPoint {
    pub fn new(quality_loss: f64, time_ms: f64) -> Self {
        Self { quality_loss, time_ms }
    }
}

impl Default for RefPoint {
    fn default() -> Self {
        Self::new(1.0, 50_000.0)
    }
}

/// Indices of the non-dominated points (both coordinates minimized). Of several identical
/// points only the first is kept. Indices are ascending.
pub fn pareto_front_indices(points: &[HvPoint]) -> Vec<usize> {
    // Sort by (loss, time, index); a point survives iff its time is strictly below every
    // earlier survivor's.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .quality_loss
            .total_cmp(&points[b].quality_loss)
            .then(points[a].time_ms.total_cmp(&points[b].time_ms))
            .then(a.cmp(&b))
    });
    let mut keep = Vec::new();
    let mut best_time = f64::INFINITY;
    for i in order {
        if points[i].time_ms < best_time {
            best_time = points[i].time_ms;
            keep.push(i);
        }
    }
    keep.sort_unstable();
    keep
}

/// Non-dominated subset of `records` by (1 - quality, time_ms), in input order.
pub fn pareto_front(records: &[EvaluationRecord]) -> Vec<EvaluationRecord> {
    let points: Vec<HvPoint> = records.iter().map(HvPoint::from).collect();
    pareto_front_indices(&points).into_iter().map(|i| records[i].clone()).collect()
}

/// Exact area dominated by `points` inside the box bounded by `reference`.
///
/// Points that are not strictly better than the reference in both coordinates contribute
/// nothing. Dominated and duplicate points are handled by the sweep.
pub fn hypervolume_2d(points: &[HvPoint], reference: &RefPoint) -> f64 {
    let mut inside: Vec<HvPoint> = points
        .iter()
        .copied()
        .filter(|p| p.quality_loss < reference.quality_loss && p.time_ms < reference.time_ms)
        .collect();
    inside.sort_by(|a, b| a.quality_loss.total_cmp(&b.quality_loss).then(a.time_ms.total_cmp(&b.time_ms)));
    let mut area = 0.0;
    let mut ceiling = reference.time_ms;
    for p in inside {
        if p.time_ms < ceiling {
            area += (reference.quality_loss - p.quality_loss) * (ceiling - p.time_ms);
            ceiling = p.time_ms;
        }
    }
    area
}

/// Summary statistics of one sample.
///
/// Quantiles use linear interpolation between order statistics: the `p` quantile of sorted
/// values `v[0..n]` is `v[k] + f * (v[k+1] - v[k])` with `k + f = p * (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let k = libm::floor(h) as usize;
    if k + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
}

pub fn run_stats(values: &[f64]) -> Result<RunStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(RunStats {
        n: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

/// Headline numbers of one run's final front.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSummary {
    /// Lowest inference time on the front.
    pub best_time_ms: f64,
    /// Highest quality on the front.
    pub best_quality: f64,
    pub hypervolume: f64,
    pub front_size: usize,
}

pub fn summarize_run(archive: &RunArchive, reference: &RefPoint) -> Option<RunSummary> {
    let front = &archive.final_front;
    if front.is_empty() {
        return None;
    }
    let points: Vec<HvPoint> = front.iter().map(|i| HvPoint::from(i.objectives)).collect();
    Some(RunSummary {
        best_time_ms: front.iter().map(|i| i.objectives.time_ms).fold(f64::INFINITY, f64::min),
        best_quality: front.iter().map(|i| i.objectives.quality).fold(f64::NEG_INFINITY, f64::max),
        hypervolume: hypervolume_2d(&points, reference),
        front_size: front.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ApproachSummary {
    pub runs: Vec<RunSummary>,
    pub best_time_ms: RunStats,
    pub best_quality: RunStats,
    pub hypervolume: RunStats,
}

/// Side-by-side comparison of two means.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanRatio {
    pub mean_a: f64,
    pub mean_b: f64,
    pub a_over_b: f64,
    pub b_over_a: f64,
    /// `(a / b - 1) * 100`, i.e. how many percent larger `a` is than `b`.
    pub percent_a_over_b: f64,
}

impl MeanRatio {
    pub fn new(mean_a: f64, mean_b: f64) -> Self {
        let ratio = |x: f64, y: f64| if x == y { 1.0 } else { x / y };
        let a_over_b = ratio(mean_a, mean_b);
        Self { mean_a, mean_b, a_over_b, b_over_a: ratio(mean_b, mean_a), percent_a_over_b: (a_over_b - 1.0) * 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub ref_point: RefPoint,
    pub a: ApproachSummary,
    pub b: ApproachSummary,
    pub best_time: MeanRatio,
    pub best_quality: MeanRatio,
    pub hypervolume: MeanRatio,
}

impl ComparisonReport {
    /// Mean best quality of `b` minus that of `a`.
    pub fn quality_gap(&self) -> f64 {
        self.best_quality.mean_b - self.best_quality.mean_a
    }
}

fn summarize_side(archives: &[RunArchive], side: char, reference: &RefPoint) -> Result<ApproachSummary, MetricsError> {
    if archives.is_empty() {
        return Err(MetricsError::NoArchives(side));
    }
    let runs = archives
        .iter()
        .enumerate()
        .map(|(index, a)| summarize_run(a, reference).ok_or(MetricsError::EmptyFront { side, index }))
        .collect::<Result<Vec<_>, _>>()?;
    let column = |f: fn(&RunSummary) -> f64| run_stats(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(ApproachSummary {
        best_time_ms: column(|r| r.best_time_ms)?,
        best_quality: column(|r| r.best_quality)?,
        hypervolume: column(|r| r.hypervolume)?,
        runs,
    })
}

/// Compares approach `a` against approach `b` over their repeated runs.
///
/// All archives must declare the same reference point. `reference` overrides it for the
/// hypervolume computation; `None` uses the declared one.
pub fn compare_runs(
    a: &[RunArchive],
    b: &[RunArchive],
    reference: Option<RefPoint>,
) -> Result<ComparisonReport, MetricsError> {
    let declared = a.first().or(b.first()).map(|x| x.ref_point);
    if a.iter().chain(b).any(|x| Some(x.ref_point) != declared) {
        return Err(MetricsError::MismatchedRefPoints);
    }
    let reference = reference.or(declared).unwrap_or_default();
    let sa = summarize_side(a, 'a', &reference)?;
    let sb = summarize_side(b, 'b', &reference)?;
    Ok(ComparisonReport {
        ref_point: reference,
        best_time: MeanRatio::new(sa.best_time_ms.mean, sb.best_time_ms.mean),
        best_quality: MeanRatio::new(sa.best_quality.mean, sb.best_quality.mean),
        hypervolume: MeanRatio::new(sa.hypervolume.mean, sb.hypervolume.mean),
        a: sa,
        b: sb,
    })
}
