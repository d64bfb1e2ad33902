use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{FeatureKind, FeatureVector};
use crate::error::{Error, Result};
use crate::metrics::train_forest;
use crate::nn::Matrix;
use crate::rng::RngStream;

/// Area under the ROC curve in its Mann–Whitney form: the probability that
/// a positive outscores a negative, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks, 1-based.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Adversary protocol shared by both shadow methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Shadow generators per world.
    pub shadows: usize,
    pub train_per_world: usize,
    pub test_per_world: usize,
    pub repeats: usize,
    pub kinds: Vec<FeatureKind>,
    pub trees: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            shadows: 100,
            train_per_world: 70,
            test_per_world: 30,
            repeats: 5,
            kinds: FeatureKind::ALL.to_vec(),
            trees: 100,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.shadows < 2 {
            return bad(format!(
                "need at least 2 shadows per world, got {}",
                self.shadows
            ));
        }
        if self.train_per_world + self.test_per_world > self.shadows {
            return bad(format!(
                "train {} + test {} exceeds {} shadows per world",
                self.train_per_world, self.test_per_world, self.shadows
            ));
        }
        if self.test_per_world < 2 {
            return bad(format!(
                "need at least 2 test examples per world, got {}",
                self.test_per_world
            ));
        }
        if self.train_per_world == 0 || self.repeats == 0 || self.trees == 0 {
            return bad("train size, repeats and trees must be positive".into());
        }
        if self.kinds.is_empty() {
            return bad("no feature kinds selected".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindResult {
    pub kind: FeatureKind,
    pub auc_mean: f64,
    /// Sample standard deviation over repeats (0 for a single repeat).
    pub auc_std: f64,
    pub aucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub results: Vec<KindResult>,
}

impl AttackResult {
    pub fn get(&self, kind: FeatureKind) -> Option<&KindResult> {
        self.results.iter().find(|r| r.kind == kind)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn stack(vectors: &[&FeatureVector]) -> Result<Matrix> {
    Matrix::from_rows(&vectors.iter().map(|v| v.values.clone()).collect::<Vec<_>>())
}

/// Trains a forest adversary on a random balanced subset of shadow features
/// and measures AUC on held-out shadows, `repeats` times per feature kind.
/// Repeat `r` of the `k`-th kind draws from child `("attack", k, r)`.
pub fn run_attack(
    vectors: &[FeatureVector],
    cfg: &AttackConfig,
    rng: &RngStream,
) -> Result<AttackResult> {
    cfg.validate()?;
    let mut results = Vec::with_capacity(cfg.kinds.len());
    for (k, &kind) in cfg.kinds.iter().enumerate() {
        let world = |b: u8| -> Vec<&FeatureVector> {
            vectors
                .iter()
                .filter(|v| v.kind == kind && v.world == b)
                .collect()
        };
        let (w0, w1) = (world(0), world(1));
        let need = cfg.train_per_world + cfg.test_per_world;
        if w0.len() < need || w1.len() < need {
            return Err(Error::InvalidArgument(format!(
                "{} features: worlds hold {} and {} vectors, split needs {need} each",
                kind.name(),
                w0.len(),
                w1.len()
            )));
        }
        let width = w0[0].values.len();
        if w0.iter().chain(&w1).any(|v| v.values.len() != width) {
            return Err(Error::InvalidArgument(format!(
                "{} features differ in length",
                kind.name()
            )));
        }
        let mut aucs = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let mut stream = rng.child("attack", k as u64, r as u64);
            let (mut o0, mut o1) = (w0.clone(), w1.clone());
            o0.shuffle(&mut stream);
            o1.shuffle(&mut stream);
            let t = cfg.train_per_world;
            let train: Vec<&FeatureVector> = o0[..t].iter().chain(&o1[..t]).copied().collect();
            let test: Vec<&FeatureVector> =
                o0[t..need].iter().chain(&o1[t..need]).copied().collect();
            let labels: Vec<usize> = train.iter().map(|v| v.world as usize).collect();
            let forest = train_forest(
                &stack(&train)?,
                &labels,
                2,
                cfg.trees,
                &stream.child("forest", 0, 0),
            )?;
            let scores = forest.scores(&stack(&test)?, 1)?;
            let truth: Vec<bool> = test.iter().map(|v| v.world == 1).collect();
            aucs.push(auc(&scores, &truth)?);
        }
        let (auc_mean, auc_std) = mean_std(&aucs);
        results.push(KindResult {
            kind,
            auc_mean,
            auc_std,
            aucs,
        });
    }
    Ok(AttackResult { results })
}

/// [`run_attack`] after randomly reassigning world labels, keeping the
/// worlds balanced. The adversary then has nothing to learn.
pub fn null_attack(
    vectors: &[FeatureVector],
    cfg: &AttackConfig,
    rng: &RngStream,
) -> Result<AttackResult> {
    let mut shuffled = vectors.to_vec();
    let mut stream = rng.child("null-labels", 0, 0);
    for &kind in &cfg.kinds {
        let idx: Vec<usize> = (0..shuffled.len())
            .filter(|&i| shuffled[i].kind == kind)
            .collect();
        let mut worlds: Vec<u8> = idx.iter().map(|&i| shuffled[i].world).collect();
        worlds.shuffle(&mut stream);
        for (&i, w) in idx.iter().zip(worlds) {
            shuffled[i].world = w;
        }
    }
    run_attack(&shuffled, cfg, rng)
}
