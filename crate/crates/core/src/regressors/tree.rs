//! Gradient-boosted regression trees with histogram splits and best-first
//! (leaf-wise) growth.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::matrix::Matrix;
use crate::stats::{empirical_quantile, mean};

const MAX_BINS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    /// Every leaf holds at least `ceil(min_node_fraction * n)` training rows.
    pub min_node_fraction: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            trees: 30,
            max_leaves: 10,
            learning_rate: 0.1,
            min_node_fraction: 0.01,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(param("tree ensemble needs at least one tree"));
        }
        if self.max_leaves < 2 {
            return Err(param("max_leaves must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(param(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.min_node_fraction > 0.0 && self.min_node_fraction < 0.5) {
            return Err(param(format!(
                "min_node_fraction must lie in (0, 0.5), got {}",
                self.min_node_fraction
            )));
        }
        Ok(())
    }

    pub fn min_leaf_rows(&self, n: usize) -> usize {
        crate::stats::ceil_rank(self.min_node_fraction * n as f64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Squared,
    Pinball(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
        rows: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left
                    } else {
                        right
                    } as usize
                }
                Node::Leaf { value, .. } => return value,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    base: f64,
    trees: Vec<Tree>,
    min_leaf_rows: usize,
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn min_leaf_rows(&self) -> usize {
        self.min_leaf_rows
    }

    /// Training-row count of every leaf of every tree.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match n {
                Node::Leaf { rows, .. } => Some(*rows as usize),
                Node::Split { .. } => None,
            })
            .collect()
    }

    pub fn fit(x: &Matrix, y: &[f64], params: &TreeParams, loss: Loss) -> Self {
        let n = y.len();
        let min_leaf = params.min_leaf_rows(n);
        let binned = Binned::new(x);
        let base = match loss {
            Loss::Squared => mean(y),
            Loss::Pinball(level) => empirical_quantile(y, level),
        };
        let mut fitted = vec![base; n];
        let mut grad = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.trees);
        let mut scratch = Vec::new();
        for _ in 0..params.trees {
            for i in 0..n {
                let r = y[i] - fitted[i];
                grad[i] = match loss {
                    Loss::Squared => r,
                    Loss::Pinball(level) => {
                        if r >= 0.0 {
                            level
                        } else {
                            level - 1.0
                        }
                    }
                };
            }
            let leaves = grow(&binned, &grad, params.max_leaves, min_leaf);
            let mut nodes = leaves.nodes;
            for (node_index, rows) in leaves.leaf_rows {
                let raw = match loss {
                    Loss::Squared => rows.iter().map(|&i| grad[i]).sum::<f64>() / rows.len() as f64,
                    Loss::Pinball(level) => {
                        scratch.clear();
                        scratch.extend(rows.iter().map(|&i| y[i] - fitted[i]));
                        empirical_quantile(&scratch, level)
                    }
                };
                let value = params.learning_rate * raw;
                for &i in &rows {
                    fitted[i] += value;
                }
                nodes[node_index] = Node::Leaf {
                    value,
                    rows: rows.len() as u32,
                };
            }
            trees.push(Tree { nodes });
        }
        Ensemble {
            base,
            trees,
            min_leaf_rows: min_leaf,
        }
    }
}

/// Features quantized to at most [`MAX_BINS`] bins; a row goes left of
/// threshold `b` when its bin is `<= b`.
struct Binned {
    n: usize,
    bins: Vec<Vec<u8>>,
    thresholds: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &Matrix) -> Self {
        let mut bins = Vec::with_capacity(x.cols());
        let mut thresholds = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let cuts: Vec<f64> = if sorted.len() <= MAX_BINS {
                sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut c: Vec<f64> = (1..MAX_BINS)
                    .map(|b| {
                        let i = b * sorted.len() / MAX_BINS;
                        0.5 * (sorted[i - 1] + sorted[i])
                    })
                    .collect();
                c.dedup();
                c
            };
            bins.push(
                col.iter()
                    .map(|&v| cuts.partition_point(|&t| t < v) as u8)
                    .collect(),
            );
            thresholds.push(cuts);
        }
        Binned {
            n: x.rows(),
            bins,
            thresholds,
        }
    }
}

struct Grown {
    nodes: Vec<Node>,
    leaf_rows: Vec<(usize, Vec<usize>)>,
}

struct Candidate {
    node: usize,
    rows: Vec<usize>,
    split: Option<(f64, usize, usize)>,
}

fn best_split(binned: &Binned, grad: &[f64], rows: &[usize], min_leaf: usize) -> Option<(f64, usize, usize)> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| grad[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, usize, usize)> = None;
    let mut sums = [0.0f64; MAX_BINS];
    let mut counts = [0usize; MAX_BINS];
    for (j, col) in binned.bins.iter().enumerate() {
        let nb = binned.thresholds[j].len() + 1;
        if nb < 2 {
            continue;
        }
        sums[..nb].fill(0.0);
        counts[..nb].fill(0);
        for &i in rows {
            let b = col[i] as usize;
            sums[b] += grad[i];
            counts[b] += 1;
        }
        let (mut sl, mut nl) = (0.0, 0usize);
        for b in 0..nb - 1 {
            sl += sums[b];
            nl += counts[b];
            let nr = n - nl;
            if nl < min_leaf {
                continue;
            }
            if nr < min_leaf {
                break;
            }
            let sr = total - sl;
            let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
            if gain > 1e-12 * parent.abs().max(1e-300) && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, j, b));
            }
        }
    }
    best
}

fn grow(binned: &Binned, grad: &[f64], max_leaves: usize, min_leaf: usize) -> Grown {
    let all: Vec<usize> = (0..binned.n).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0, rows: 0 }];
    let split = best_split(binned, grad, &all, min_leaf);
    let mut open = vec![Candidate {
        node: 0,
        rows: all,
        split,
    }];
    let mut leaves = 1;
    while leaves < max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.split.map(|(g, _, _)| (k, g)))
            .fold(None, |best: Option<(usize, f64)>, (k, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((k, g)),
            });
        let Some((k, _)) = pick else { break };
        let cand = open.swap_remove(k);
        let (_, feature, bin) = cand.split.unwrap();
        let col = &binned.bins[feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            cand.rows.iter().partition(|&&i| col[i] as usize <= bin);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, rows: 0 });
        nodes.push(Node::Leaf { value: 0.0, rows: 0 });
        nodes[cand.node] = Node::Split {
            feature: feature as u32,
            threshold: binned.thresholds[feature][bin],
            left: left as u32,
            right: (left + 1) as u32,
        };
        for (node, rows) in [(left, left_rows), (left + 1, right_rows)] {
            let split = best_split(binned, grad, &rows, min_leaf);
            open.push(Candidate { node, rows, split });
        }
        leaves += 1;
    }
    let mut leaf_rows: Vec<(usize, Vec<usize>)> = open.into_iter().map(|c| (c.node, c.rows)).collect();
    leaf_rows.sort_by_key(|(node, _)| *node);
    Grown { nodes, leaf_rows }
}
