//! Brute-force references for the vulnerable-record selectors.

use vflgan_core::data::{Attribute, Schema, TabularDataset, Value};
use vflgan_core::RngStream;

pub fn mixed_schema() -> Schema {
    Schema::new(
        vec![
            Attribute::continuous("x"),
            Attribute::categorical("c", &["a", "b", "c"]),
            Attribute::continuous("y"),
            Attribute::integer("k"),
        ],
        None,
    )
    .unwrap()
}

pub fn random_table(n: usize, rng: &mut RngStream) -> TabularDataset {
    let rows = (0..n)
        .map(|_| {
            vec![
                Value::Number(rng.normal()),
                Value::Category((rng.uniform() * 3.0) as usize),
                Value::Number((rng.normal() * 3.0).exp()),
                Value::Number((rng.uniform() * 5.0).floor()),
            ]
        })
        .collect();
    TabularDataset::new(mixed_schema(), rows).unwrap()
}

/// Type-7 quantile written from the 1-based definition `h = (n − 1)p + 1`.
pub fn quantile_oracle(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() as f64 - 1.0) * p + 1.0;
    let lo = h.floor();
    let frac = h - lo;
    let x_lo = s[lo as usize - 1];
    let x_hi = s[(lo as usize).min(s.len()) - 1 + usize::from(frac > 0.0)];
    x_lo + frac * (x_hi - x_lo)
}

pub fn outlier_oracle(ds: &TabularDataset) -> Vec<usize> {
    let mut counts = vec![0; ds.len()];
    for a in [0usize, 2, 3] {
        let col: Vec<f64> = ds
            .rows()
            .iter()
            .map(|r| r[a].as_number().unwrap())
            .collect();
        let (q1, q3) = (quantile_oracle(&col, 0.25), quantile_oracle(&col, 0.75));
        for (r, v) in col.iter().enumerate() {
            if v < &(q1 - (q3 - q1)) || v > &(q3 + (q3 - q1)) {
                counts[r] += 1;
            }
        }
    }
    counts
}

/// Straight-line distance from the raw table: categorical cosine is the
/// share of matching categories, numerics are standardized here.
pub fn nn_oracle(ds: &TabularDataset) -> (Vec<f64>, usize) {
    let n = ds.len();
    let num: Vec<Vec<f64>> = [0usize, 2, 3]
        .iter()
        .map(|&a| {
            let col: Vec<f64> = ds
                .rows()
                .iter()
                .map(|r| r[a].as_number().unwrap())
                .collect();
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            col.iter().map(|x| (x - m) / sd).collect()
        })
        .collect();
    let dist = |i: usize, j: usize| {
        let same = ds.rows()[i][1] == ds.rows()[j][1];
        let cat_cos = if same { 1.0 } else { 0.0 };
        let dot: f64 = num.iter().map(|c| c[i] * c[j]).sum();
        let ni: f64 = num.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt();
        let nj: f64 = num.iter().map(|c| c[j] * c[j]).sum::<f64>().sqrt();
        1.0 - 0.25 * cat_cos - 0.75 * dot / (ni * nj)
    };
    let mut nearest = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                nearest[i] = nearest[i].min(dist(i, j));
            }
        }
    }
    let mut best = 0;
    for i in 1..n {
        if nearest[i] > nearest[best] {
            best = i;
        }
    }
    (nearest, best)
}
