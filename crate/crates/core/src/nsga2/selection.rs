use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use super::{assign_rank_and_crowding, Individual, NsgaConfig};

/// Binary tournament on fresh `rank`/`crowding`: lower rank wins, then larger crowding, then the
/// first draw. Returns the winner's index.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    assert!(!pop.is_empty(), "tournament on an empty population");
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    match crowded_compare(&pop[a], &pop[b]) {
        Ordering::Less => b,
        _ => a,
    }
}

/// `Greater` means `x` is preferred.
fn crowded_compare(x: &Individual, y: &Individual) -> Ordering {
    y.rank.cmp(&x.rank).then_with(|| x.crowding.total_cmp(&y.crowding))
}

/// Environmental selection: fills `n` slots front by front from `merged`; the front that does
/// not fit is truncated by descending crowding distance (ties keep the earlier individual).
/// The survivors come back with rank and crowding recomputed among themselves.
pub fn select_survivors(mut merged: Vec<Individual>, n: usize, config: &NsgaConfig) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut merged, config);
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let mut split = front;
        split.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
        split.truncate(n - keep.len());
        keep.extend(split);
        break;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    let mut survivors: Vec<Individual> = keep.into_iter().filter_map(|i| slots[i].take()).collect();
    assign_rank_and_crowding(&mut survivors, config);
    survivors
}
