use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest, DEFAULT_TREES};
use crate::data::{AttributeKind, TabularDataset, Value};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::RngStream;

pub const CV_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub trtr: Scores,
    pub tsts: Scores,
    pub trts: Scores,
    pub tstr: Scores,
    pub total_difference: f64,
}

impl UtilityReport {
    pub fn settings(&self) -> [(&'static str, Scores); 4] {
        [
            ("TRTR", self.trtr),
            ("TSTS", self.tsts),
            ("TRTS", self.trts),
            ("TSTR", self.tstr),
        ]
    }
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over the classes occurring in either
/// `truth` or `pred`.
pub fn macro_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let n_classes = truth.iter().chain(pred).copied().max().map_or(0, |m| m + 1);
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    let mut k = 0;
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom == 0 {
            continue;
        }
        sum += 2.0 * tp[c] as f64 / denom as f64;
        k += 1;
    }
    if k == 0 {
        0.0
    } else {
        sum / k as f64
    }
}

/// Classifier inputs: every non-target attribute as a column (raw numeric
/// value or category index), and the target's category index as label.
pub fn classification_view(
    ds: &TabularDataset,
    target: usize,
) -> Result<(Matrix, Vec<usize>, usize)> {
    let schema = ds.schema();
    let n_classes = match &schema.attributes[target].kind {
        AttributeKind::Categorical { categories } => categories.len(),
        _ => {
            return Err(Error::Schema(format!(
                "target {:?} is not categorical",
                schema.attributes[target].name
            )))
        }
    };
    let d = schema.len() - 1;
    let mut x = Matrix::zeros(ds.len(), d);
    let mut y = Vec::with_capacity(ds.len());
    for (r, row) in ds.rows().iter().enumerate() {
        let out = x.row_mut(r);
        let mut k = 0;
        for (a, v) in row.iter().enumerate() {
            if a == target {
                y.push(v.as_category().expect("validated categorical"));
                continue;
            }
            out[k] = match *v {
                Value::Number(n) => n,
                Value::Category(c) => c as f64,
            };
            k += 1;
        }
    }
    Ok((x, y, n_classes))
}

fn distinct(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

/// Fold boundaries for `k` contiguous folds; the first `n % k` folds are one
/// row longer.
pub fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        out.push((start, start + len));
        start += len;
    }
    out
}

fn fold_order(y: &[usize], bounds: &[(usize, usize)], rng: &RngStream) -> Result<Vec<usize>> {
    let usable = |order: &[usize]| {
        bounds.iter().all(|&(s, e)| {
            let train: Vec<usize> = order[..s]
                .iter()
                .chain(&order[e..])
                .map(|&i| y[i])
                .collect();
            distinct(&train) >= 2
        })
    };
    let mut order: Vec<usize> = (0..y.len()).collect();
    if !usable(&order) {
        order.shuffle(&mut rng.child("cv-shuffle", 0, 0));
        if !usable(&order) {
            return Err(Error::SingleClass);
        }
    }
    Ok(order)
}

/// Contiguous `CV_FOLDS`-fold evaluation of a source table against itself
/// and, with the same per-fold forests, against a target table: the forest
/// trained without fold `k` of the source is scored on fold `k` of the
/// source and on fold `k` of the target. Folds follow file order; if some
/// training fold holds a single class the rows are shuffled once and the
/// folds rebuilt, and a second failure is an error.
pub fn cross_fit(
    source: (&Matrix, &[usize]),
    target: (&Matrix, &[usize]),
    n_classes: usize,
    rng: &RngStream,
) -> Result<(Scores, Scores)> {
    let (sx, sy) = source;
    let (tx, ty) = target;
    for n in [sy.len(), ty.len()] {
        if n < CV_FOLDS {
            return Err(Error::InvalidArgument(format!(
                "{n} rows are too few for {CV_FOLDS}-fold cross-validation"
            )));
        }
    }
    let s_bounds = fold_bounds(sy.len(), CV_FOLDS);
    let t_bounds = fold_bounds(ty.len(), CV_FOLDS);
    let s_order = fold_order(sy, &s_bounds, rng)?;
    let t_order: Vec<usize> = (0..ty.len()).collect();
    let mut own = (0.0, 0.0);
    let mut cross = (0.0, 0.0);
    for k in 0..CV_FOLDS {
        let (s, e) = s_bounds[k];
        let train: Vec<usize> = s_order[..s].iter().chain(&s_order[e..]).copied().collect();
        let train_y: Vec<usize> = train.iter().map(|&i| sy[i]).collect();
        let forest = train_forest(
            &sx.select_rows(&train),
            &train_y,
            n_classes,
            DEFAULT_TREES,
            &rng.child("fold", 0, k as u64),
        )?;
        let score = |x: &Matrix, y: &[usize], idx: &[usize], acc: &mut (f64, f64)| -> Result<()> {
            let truth: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
            let pred = forest.predict(&x.select_rows(idx))?;
            acc.0 += accuracy(&truth, &pred);
            acc.1 += macro_f1(&truth, &pred);
            Ok(())
        };
        score(sx, sy, &s_order[s..e], &mut own)?;
        let (ts, te) = t_bounds[k];
        score(tx, ty, &t_order[ts..te], &mut cross)?;
    }
    let k = CV_FOLDS as f64;
    Ok((
        Scores {
            accuracy: own.0 / k,
            f1: own.1 / k,
        },
        Scores {
            accuracy: cross.0 / k,
            f1: cross.1 / k,
        },
    ))
}

/// Mean accuracy and macro-F1 of `CV_FOLDS`-fold cross-validation.
pub fn cross_validate(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    rng: &RngStream,
) -> Result<Scores> {
    Ok(cross_fit((x, y), (x, y), n_classes, rng)?.0)
}

/// TRTR/TRTS from forests trained on real folds, TSTS/TSTR from forests
/// trained on synthetic folds.
pub fn utility_fourway(
    real: &TabularDataset,
    synth: &TabularDataset,
    target: &str,
    rng: &RngStream,
) -> Result<UtilityReport> {
    if real.schema() != synth.schema() {
        return Err(Error::Schema("real and synthetic schemas differ".into()));
    }
    let t = real.schema().index_of(target)?;
    let (rx, ry, k) = classification_view(real, t)?;
    let (sx, sy, _) = classification_view(synth, t)?;
    let (trtr, trts) = cross_fit((&rx, &ry), (&sx, &sy), k, rng)?;
    let (tsts, tstr) = cross_fit((&sx, &sy), (&rx, &ry), k, rng)?;
    let total_difference = [tsts, trts, tstr]
        .iter()
        .map(|s| (s.accuracy - trtr.accuracy).abs() + (s.f1 - trtr.f1).abs())
        .sum();
    Ok(UtilityReport {
        trtr,
        tsts,
        trts,
        tstr,
        total_difference,
    })
}
