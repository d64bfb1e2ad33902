use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Encoder, TabularDataset, Value};
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Naive,
    Correlation,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 2] = [FeatureKind::Naive, FeatureKind::Correlation];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Naive => "naive",
            FeatureKind::Correlation => "correlation",
        }
    }
}

/// One adversary input: summary features of one shadow output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// 1 when the shadow was trained with the target record.
    pub world: u8,
    pub shadow: usize,
    pub kind: FeatureKind,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance.
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn summary(v: &[f64]) -> [f64; 3] {
    [mean(v), median(v), variance(v)]
}

/// Per attribute: `(mean, median, variance)` for numeric attributes and the
/// relative frequency of every category for categorical ones.
pub fn extract_naive(ds: &TabularDataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot summarize an empty dataset".into(),
        ));
    }
    let n = ds.len() as f64;
    let mut out = Vec::new();
    for (a, attr) in ds.schema().attributes.iter().enumerate() {
        match &attr.kind {
            AttributeKind::Categorical { categories } => {
                let mut freq = vec![0.0; categories.len()];
                for row in ds.rows() {
                    if let Value::Category(c) = row[a] {
                        freq[c] += 1.0 / n;
                    }
                }
                out.extend(freq);
            }
            _ => {
                let col = ds.numeric_column(a).ok_or_else(|| {
                    Error::Schema(format!("attribute {:?} is not numeric", attr.name))
                })?;
                out.extend(summary(&col));
            }
        }
    }
    Ok(out)
}

/// `(mean, median, variance)` of every column.
pub fn naive_columns(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() == 0 {
        return Err(Error::InvalidArgument(
            "cannot summarize an empty matrix".into(),
        ));
    }
    Ok((0..m.cols()).flat_map(|c| summary(&m.column(c))).collect())
}

/// Strict upper triangle of the Pearson correlation matrix, row-major.
/// Pairs involving a constant column are 0.
pub fn extract_corr(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least two rows".into(),
        ));
    }
    let d = m.cols();
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|c| {
            let col = m.column(c);
            let mu = mean(&col);
            col.into_iter().map(|x| x - mu).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut out = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            let r = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centered[i]
                    .iter()
                    .zip(&centered[j])
                    .map(|(a, b)| a * b)
                    .sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out.push(r);
        }
    }
    Ok(out)
}

/// Features of a synthetic table given in encoded layout. Naive features
/// are taken on the decoded table, correlations on its re-encoding.
pub fn extract_encoded(
    kind: FeatureKind,
    encoder: &Encoder,
    synthetic: &Matrix,
) -> Result<Vec<f64>> {
    let table = encoder.decode(synthetic)?;
    match kind {
        FeatureKind::Naive => extract_naive(&table),
        FeatureKind::Correlation => extract_corr(&encoder.encode(&table)?.matrix),
    }
}

/// Features of a per-record intermediate feature matrix.
pub fn extract_matrix(kind: FeatureKind, m: &Matrix) -> Result<Vec<f64>> {
    match kind {
        FeatureKind::Naive => naive_columns(m),
        FeatureKind::Correlation => extract_corr(m),
    }
}
