//! Closed forms and random inputs for the Fréchet distance.

use vflgan_core::metrics::{dataset_stats, DatasetStats};
use vflgan_core::nn::Matrix;
use vflgan_core::RngStream;

pub fn diag_stats(mean: Vec<f64>, var: &[f64]) -> DatasetStats {
    let d = var.len();
    let mut cov = Matrix::zeros(d, d);
    for (i, v) in var.iter().enumerate() {
        cov[(i, i)] = *v;
    }
    DatasetStats { mean, cov }
}

pub fn random_stats(d: usize, rng: &mut RngStream) -> DatasetStats {
    let x = rng.normal_matrix(40, d);
    let mix = rng.normal_matrix(d, d);
    dataset_stats(&x.matmul(&mix).unwrap()).unwrap()
}

pub fn random_rotation(d: usize, rng: &mut RngStream) -> Matrix {
    // Gram–Schmidt on a Gaussian matrix.
    let g = rng.normal_matrix(d, d);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in 0..d {
        let mut v = g.column(c);
        for u in &cols {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= n);
        cols.push(v);
    }
    Matrix::from_rows(&cols).unwrap().transpose()
}
