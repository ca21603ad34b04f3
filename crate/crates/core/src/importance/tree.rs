use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{check_inputs, FeatureMatrix, ForestConfig, ImportanceError};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Sum of squared errors removed by the split: `SSE(node) - SSE(left) - SSE(right)`.
        sse_decrease: f64,
    },
}

/// A fitted CART regression tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_samples: usize,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Per-feature impurity decrease weighted by node sample fraction:
    /// `sum over splits on f of (n_node / n_root) * (var(node) - weighted var(children))`,
    /// which equals the split's SSE decrease divided by `n_root`.
    pub fn impurity_importance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split { feature, sse_decrease, .. } = node {
                out[*feature] += sse_decrease / self.n_samples as f64;
            }
        }
        out
    }
}

/// Fits one tree on all rows of `x`.
pub fn fit_tree<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    y: &[f64],
    cfg: &ForestConfig,
    rng: &mut R,
) -> Result<RegressionTree, ImportanceError> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    Ok(fit_tree_rows(x, y, &rows, cfg, rng))
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Fits one tree on the multiset of row indices `rows` (which may repeat rows, as a bootstrap
/// sample does). Inputs are assumed checked.
///
/// Each feature's sample order is sorted once at the root; a split partitions every sorted list
/// stably into its two children, so no node sorts again.
pub fn fit_tree_rows<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &[usize],
    cfg: &ForestConfig,
    rng: &mut R,
) -> RegressionTree {
    let d = x.n_cols();
    let m = rows.len();
    let k = cfg.features_per_node(d);
    let min_leaf = cfg.min_samples_leaf.max(1);
    let mut nodes: Vec<Node> = Vec::new();
    let mut features: Vec<usize> = (0..d).collect();

    // Column-major copies indexed by sample position.
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    let cols: Vec<Vec<f64>> = (0..d).map(|f| rows.iter().map(|&r| x.get(r, f)).collect()).collect();
    // `order[f * n .. (f + 1) * n]` lists the node's sample positions sorted by feature f.
    let mut root = Vec::with_capacity(d * m);
    for col in &cols {
        let start = root.len();
        root.extend(0..m as u32);
        root[start..].sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
    }
    let mut goes_left = vec![false; m];

    nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
    let mut stack: Vec<(usize, Vec<u32>, usize)> = vec![(0, root, 0)];
    while let Some((slot, order, depth)) = stack.pop() {
        let n = order.len() / d;
        let members = &order[..n];
        // Targets are centered on one of the node's samples; split scores then depend only on
        // differences between targets, so a constant shift of y cannot change them.
        let pivot = ys[members[0] as usize];
        let (sum, sq) = members.iter().fold((0.0, 0.0), |(s, q), &p| {
            let v = ys[p as usize] - pivot;
            (s + v, q + v * v)
        });
        let sse = (sq - sum * sum / n as f64).max(0.0);
        let mean = pivot + sum / n as f64;

        let can_split = n >= 2 * min_leaf && cfg.max_depth.is_none_or(|md| depth < md) && sse > 0.0;
        let mut best: Option<Best> = None;
        if can_split {
            // Partial Fisher-Yates: the first k entries are the sampled features.
            for i in 0..k {
                let j = rng.gen_range(i..d);
                features.swap(i, j);
            }
            for &f in &features[..k] {
                let list = &order[f * n..(f + 1) * n];
                let col = &cols[f];
                if col[list[0] as usize] == col[list[n - 1] as usize] {
                    continue;
                }
                let (mut sum_l, mut sq_l) = (0.0, 0.0);
                for i in 0..n - 1 {
                    let v = ys[list[i] as usize] - pivot;
                    sum_l += v;
                    sq_l += v * v;
                    let n_l = i + 1;
                    if n_l < min_leaf {
                        continue;
                    }
                    if n - n_l < min_leaf {
                        break;
                    }
                    let (xa, xb) = (col[list[i] as usize], col[list[i + 1] as usize]);
                    if !(xa < xb) {
                        continue;
                    }
                    let sum_r = sum - sum_l;
                    let sq_r = sq - sq_l;
                    let sse_l = sq_l - sum_l * sum_l / n_l as f64;
                    let sse_r = sq_r - sum_r * sum_r / (n - n_l) as f64;
                    let gain = sse - sse_l - sse_r;
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        let mid = xa + (xb - xa) / 2.0;
                        let threshold = if mid < xb { mid } else { xa };
                        best = Some(Best { gain, feature: f, threshold });
                    }
                }
            }
        }

        match best {
            Some(b) if b.gain > sse * 1e-12 => {
                let col = &cols[b.feature];
                let mut n_left = 0;
                for &p in members {
                    let l = col[p as usize] <= b.threshold;
                    goes_left[p as usize] = l;
                    n_left += l as usize;
                }
                let mut left_order = Vec::with_capacity(d * n_left);
                let mut right_order = Vec::with_capacity(d * (n - n_left));
                for f in 0..d {
                    for &p in &order[f * n..(f + 1) * n] {
                        if goes_left[p as usize] {
                            left_order.push(p);
                        } else {
                            right_order.push(p);
                        }
                    }
                }
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
                nodes.push(Node::Leaf { value: 0.0, n_samples: 0 });
                nodes[slot] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                    n_samples: n,
                    sse_decrease: b.gain.max(0.0),
                };
                // Right first so the left subtree is expanded first.
                stack.push((right, right_order, depth + 1));
                stack.push((left, left_order, depth + 1));
            }
            _ => nodes[slot] = Node::Leaf { value: mean, n_samples: n },
        }
    }
    RegressionTree { nodes, n_features: d, n_samples: m }
}
