use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::Matrix;
use crate::rng::RngStream;

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class distribution of the training samples reaching this leaf.
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Class with the largest leaf share; lowest index on ties.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        crate::nn::argmax(self.leaf_for(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub n_features: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn class_counts(labels: &[usize], idx: &[usize], n_classes: usize) -> Vec<f64> {
    let mut c = vec![0.0; n_classes];
    for &i in idx {
        c[labels[i]] += 1.0;
    }
    c
}

/// Best Gini split of `idx` on one feature, or `None` if the feature is
/// constant on these samples. Score is the weighted child impurity
/// `Σ_child n_child − Σ_k c_k² / n_child` (lower is better).
fn best_split_on(
    x: &Matrix,
    labels: &[usize],
    idx: &[usize],
    feature: usize,
    n_classes: usize,
    total: &[f64],
    pairs: &mut Vec<(f64, usize)>,
) -> Option<(f64, f64)> {
    pairs.clear();
    pairs.extend(idx.iter().map(|&i| (x[(i, feature)], labels[i])));
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let n = pairs.len() as f64;
    let mut left = vec![0.0; n_classes];
    let mut left_sq = 0.0;
    let mut right_sq: f64 = total.iter().map(|c| c * c).sum();
    let mut best: Option<(f64, f64)> = None;
    for k in 0..pairs.len() - 1 {
        let c = pairs[k].1;
        // Move one sample of class c from right to left.
        let (l, r) = (left[c], total[c] - left[c]);
        left_sq += 2.0 * l + 1.0;
        right_sq += -2.0 * r + 1.0;
        left[c] += 1.0;
        if pairs[k].0 == pairs[k + 1].0 {
            continue;
        }
        let nl = (k + 1) as f64;
        let nr = n - nl;
        let score = (nl - left_sq / nl) + (nr - right_sq / nr);
        if best.map_or(true, |(s, _)| score < s) {
            let mid = 0.5 * (pairs[k].0 + pairs[k + 1].0);
            // Guard against the midpoint rounding onto the upper value.
            let thr = if mid < pairs[k + 1].0 {
                mid
            } else {
                pairs[k].0
            };
            best = Some((score, thr));
        }
    }
    best
}

fn grow_tree(x: &Matrix, labels: &[usize], n_classes: usize, rng: &mut RngStream) -> Tree {
    let n = x.rows();
    let d = x.cols();
    let mtry = ((d as f64).sqrt() as usize).max(1);
    let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();

    let mut nodes = vec![Node::Leaf { dist: Vec::new() }];
    let mut stack = vec![(0usize, sample)];
    let mut features: Vec<usize> = (0..d).collect();
    let mut pairs = Vec::new();
    while let Some((slot, idx)) = stack.pop() {
        let counts = class_counts(labels, &idx, n_classes);
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let mut best: Option<Best> = None;
        if !pure {
            features.shuffle(rng);
            let mut visited = 0;
            for &f in &features {
                if visited == mtry {
                    break;
                }
                if let Some((score, threshold)) =
                    best_split_on(x, labels, &idx, f, n_classes, &counts, &mut pairs)
                {
                    visited += 1;
                    if best.as_ref().map_or(true, |b| score < b.score) {
                        best = Some(Best {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
            }
        }
        match best {
            None => {
                let total: f64 = counts.iter().sum();
                nodes[slot] = Node::Leaf {
                    dist: counts.iter().map(|c| c / total).collect(),
                };
            }
            Some(b) => {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[(i, b.feature)] <= b.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { dist: Vec::new() });
                let right = nodes.len();
                nodes.push(Node::Leaf { dist: Vec::new() });
                nodes[slot] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                };
                stack.push((right, ri));
                stack.push((left, li));
            }
        }
    }
    Tree { nodes }
}

/// Bagged Gini trees grown to purity with `√d` candidate features per
/// split. Tree `t` draws from child stream `("tree", 0, t)` of `rng`, so
/// the result does not depend on scheduling.
pub fn train_forest(
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    trees: usize,
    rng: &RngStream,
) -> Result<Forest> {
    if labels.len() != x.rows() {
        return Err(shape_err("train_forest labels", x.rows(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside {n_classes} classes"
        )));
    }
    let present = class_counts(labels, &(0..labels.len()).collect::<Vec<_>>(), n_classes)
        .iter()
        .filter(|&&c| c > 0.0)
        .count();
    if present < 2 {
        return Err(Error::SingleClass);
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument("non-finite features".into()));
    }
    let trees = (0..trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng.child("tree", 0, t as u64);
            grow_tree(x, labels, n_classes, &mut r)
        })
        .collect();
    Ok(Forest {
        trees,
        n_classes,
        n_features: x.cols(),
    })
}

impl Forest {
    /// Per-row fraction of trees voting for each class.
    pub fn vote_fractions(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_features {
            return Err(shape_err("Forest::predict", self.n_features, x.cols()));
        }
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let w = 1.0 / self.trees.len() as f64;
        for r in 0..x.rows() {
            let row = x.row(r);
            for t in &self.trees {
                out[(r, t.predict_row(row))] += w;
            }
        }
        Ok(out)
    }

    /// Majority vote; lowest class index on ties.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let votes = self.vote_fractions(x)?;
        Ok((0..votes.rows())
            .map(|r| crate::nn::argmax(votes.row(r)))
            .collect())
    }

    /// Vote fraction for `class`.
    pub fn scores(&self, x: &Matrix, class: usize) -> Result<Vec<f64>> {
        Ok(self.vote_fractions(x)?.column(class))
    }
}
