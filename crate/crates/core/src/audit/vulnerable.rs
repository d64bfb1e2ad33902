use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, TabularDataset};
use crate::error::{Error, Result};

/// Quantile by linear interpolation between order statistics at position
/// `p · (n − 1)` of the sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    /// Number of outlying numeric attributes per record.
    pub counts: Vec<usize>,
    /// Every record attaining the maximum count, ascending.
    pub ties: Vec<usize>,
    /// Lowest index among `ties`.
    pub index: usize,
}

/// Flags attribute `a` of a record as an outlier when it lies more than
/// `Q3 − Q1` below `Q1` or above `Q3`, and picks the record with the most
/// flags.
pub fn find_vulnerable_outlier(ds: &TabularDataset) -> Result<OutlierReport> {
    if ds.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 records, got {}",
            ds.len()
        )));
    }
    let mut counts = vec![0usize; ds.len()];
    for (a, attr) in ds.schema().attributes.iter().enumerate() {
        if attr.is_categorical() {
            continue;
        }
        let col = ds
            .numeric_column(a)
            .expect("non-categorical attributes are numeric");
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
        let t = q3 - q1;
        for (c, v) in counts.iter_mut().zip(&col) {
            if q1 - v > t || v - q3 > t {
                *c += 1;
            }
        }
    }
    let max = *counts.iter().max().expect("non-empty");
    let ties: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] == max).collect();
    Ok(OutlierReport {
        index: ties[0],
        counts,
        ties,
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb),
    }
}

/// Record split into its one-hot part `h` and numeric part `c`.
struct Parts {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    w_cat: f64,
    w_num: f64,
}

fn record_parts(ds: &EncodedDataset) -> Parts {
    let enc = &ds.encoder;
    let (mut cat_cols, mut num_cols) = (Vec::new(), Vec::new());
    let (mut n_cat, mut n_num) = (0usize, 0usize);
    for col in &enc.columns {
        if col.encoding.is_one_hot() {
            cat_cols.extend(col.span());
            n_cat += 1;
        } else {
            num_cols.extend(col.span());
            n_num += 1;
        }
    }
    let f = (n_cat + n_num) as f64;
    let m = &ds.matrix;
    Parts {
        h: (0..m.rows())
            .map(|r| cat_cols.iter().map(|&c| m[(r, c)]).collect())
            .collect(),
        c: (0..m.rows())
            .map(|r| num_cols.iter().map(|&c| m[(r, c)]).collect())
            .collect(),
        w_cat: n_cat as f64 / f,
        w_num: n_num as f64 / f,
    }
}

impl Parts {
    fn distance(&self, i: usize, j: usize) -> f64 {
        let mut d = 1.0;
        if self.w_cat > 0.0 {
            d -= self.w_cat * cosine(&self.h[i], &self.h[j]);
        }
        if self.w_num > 0.0 {
            d -= self.w_num * cosine(&self.c[i], &self.c[j]);
        }
        d
    }
}

/// Mixed-type record distance `1 − (|F_cat|/F)·cos(h_i, h_j) − (|F_num|/F)·cos(c_i, c_j)`
/// on encoded rows `i` and `j`. An all-zero numeric part has cosine 1 with
/// another all-zero part and 0 otherwise.
pub fn record_distance(ds: &EncodedDataset, i: usize, j: usize) -> f64 {
    record_parts(ds).distance(i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnReport {
    /// Distance from every record to its nearest other record.
    pub nearest: Vec<f64>,
    /// Record with the largest nearest-neighbour distance (lowest index on ties).
    pub index: usize,
}

pub fn find_vulnerable_nn(ds: &EncodedDataset) -> Result<NnReport> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 records, got {n}"
        )));
    }
    let parts = record_parts(ds);
    let nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| parts.distance(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut index = 0;
    for (i, &d) in nearest.iter().enumerate() {
        if d > nearest[index] {
            index = i;
        }
    }
    Ok(NnReport { nearest, index })
}
