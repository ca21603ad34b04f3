use alloc::vec;
use alloc::vec::Vec;

use super::{Individual, NsgaConfig, ScalingWeights};

/// Pareto dominance on scaled pairs, both coordinates maximized.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    dominates_slice(&[a.0, a.1], &[b.0, b.1])
}

/// Pareto dominance for any number of maximized coordinates.
pub fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sorting of maximized points. Returns fronts of indices; front 0 is the
/// non-dominated set and indices within a front are ascending.
pub fn nondominated_fronts<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (pi, pj) = (points[i].as_ref(), points[j].as_ref());
            if dominates_slice(pi, pj) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_slice(pj, pi) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(core::mem::replace(&mut current, next));
    }
    fronts
}

/// Sorts a population on its scaled objectives (pareto dominance) and writes each
/// individual's `rank`.
pub fn fast_nondominated_sort(pop: &mut [Individual], w: &ScalingWeights) -> Vec<Vec<usize>> {
    let points: Vec<[f64; 2]> = pop
        .iter()
        .map(|ind| {
            let (q, t) = ind.objectives.scaled(w);
            [q, t]
        })
        .collect();
    let fronts = nondominated_fronts(&points);
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = rank;
        }
    }
    fronts
}

/// Crowding distance of every point in one front.
///
/// Per coordinate the points are ordered by value; the two extremes get `+inf` and interior
/// points add the gap between their neighbours divided by the coordinate's range. A coordinate
/// whose range is zero contributes nothing. Fronts of at most two points are all `+inf`.
pub fn crowding_distances<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    let n = points.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let dims = points[0].as_ref().len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..dims {
        let value = |i: usize| points[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let lo = value(order[0]);
        let hi = value(order[n - 1]);
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for j in 1..n - 1 {
            dist[order[j]] += (value(order[j + 1]) - value(order[j - 1])) / range;
        }
    }
    dist
}

/// Crowding distance of a front of individuals on their scaled objectives.
pub fn crowding_distance(front: &[Individual], w: &ScalingWeights) -> Vec<f64> {
    let points: Vec<[f64; 2]> = front
        .iter()
        .map(|ind| {
            let (q, t) = ind.objectives.scaled(w);
            [q, t]
        })
        .collect();
    crowding_distances(&points)
}

/// Recomputes `rank` and `crowding` for the whole population under `config`'s mode and
/// weights. Returns the fronts.
pub fn assign_rank_and_crowding(pop: &mut [Individual], config: &NsgaConfig) -> Vec<Vec<usize>> {
    let fitness: Vec<_> = pop.iter().map(|ind| config.fitness(&ind.objectives)).collect();
    let fronts = nondominated_fronts(&fitness);
    for (rank, front) in fronts.iter().enumerate() {
        let pts: Vec<_> = front.iter().map(|&i| fitness[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distances(&pts)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}
