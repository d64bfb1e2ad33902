use serde::{Deserialize, Serialize};

use super::linalg::{psd_sqrt, symmetric_eigen};
use crate::error::{shape_err, Error, Result};
use crate::nn::Matrix;

/// First two moments of an encoded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

/// Column means and population covariance.
pub fn dataset_stats(m: &Matrix) -> Result<DatasetStats> {
    if m.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two rows for covariance, got {}",
            m.rows()
        )));
    }
    let mean = m.column_means();
    let mut centered = m.clone();
    let neg: Vec<f64> = mean.iter().map(|v| -v).collect();
    centered.add_row_vector(&neg);
    let mut cov = centered.t_matmul(&centered)?;
    cov.scale(1.0 / m.rows() as f64);
    let d = cov.rows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(DatasetStats { mean, cov })
}

/// `‖μ−μ̃‖² + Tr(V + Ṽ − 2(VṼ)^{1/2})`, with the cross term evaluated as
/// `Tr((V^{1/2} Ṽ V^{1/2})^{1/2})`. Clamped at zero.
pub fn frechet_distance(a: &DatasetStats, b: &DatasetStats) -> Result<f64> {
    if a.mean.len() != b.mean.len() || a.cov.shape() != b.cov.shape() {
        return Err(shape_err("frechet_distance", a.mean.len(), b.mean.len()));
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let d = a.mean.len();
    let trace = |m: &Matrix| (0..d).map(|i| m[(i, i)]).sum::<f64>();
    let root = psd_sqrt(&a.cov)?;
    let inner = root.matmul(&b.cov)?.matmul(&root)?;
    let (vals, _) = symmetric_eigen(&inner)?;
    let cross: f64 = vals.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let fd = mean_term + trace(&a.cov) + trace(&b.cov) - 2.0 * cross;
    Ok(fd.max(0.0))
}

pub fn frechet_between(real: &Matrix, synth: &Matrix) -> Result<f64> {
    frechet_distance(&dataset_stats(real)?, &dataset_stats(synth)?)
}
