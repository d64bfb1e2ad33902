//! Independent straight-line reference implementations used as test oracles.
//! Nothing here calls into the tape/backward machinery under test.

#![allow(dead_code)]

pub mod accountant;
pub mod frechet;
pub mod monolith;
pub mod selectors;

use vflgan_core::nn::{Activation, Layer, Matrix, Mlp};
use vflgan_core::RngStream;

pub const ACTIVATIONS: [Activation; 4] = [
    Activation::Relu,
    Activation::LeakyRelu { slope: 0.2 },
    Activation::Tanh,
    Activation::Identity,
];

fn act(kind: Activation, a: f64) -> f64 {
    match kind {
        Activation::Relu => {
            if a > 0.0 {
                a
            } else {
                0.0
            }
        }
        Activation::LeakyRelu { slope } => {
            if a > 0.0 {
                a
            } else {
                slope * a
            }
        }
        Activation::Tanh => a.tanh(),
        Activation::Identity => a,
    }
}

fn act_d(kind: Activation, a: f64) -> f64 {
    match kind {
        Activation::Relu => (a > 0.0) as u8 as f64,
        Activation::LeakyRelu { slope } => {
            if a > 0.0 {
                1.0
            } else {
                slope
            }
        }
        Activation::Tanh => 1.0 - a.tanh().powi(2),
        Activation::Identity => 1.0,
    }
}

/// Pre-activations of every layer for one input row, by explicit loops.
pub fn naive_pre_activations(mlp: &Mlp, x: &[f64]) -> Vec<Vec<f64>> {
    let mut h = x.to_vec();
    let mut pres = Vec::new();
    for layer in mlp.layers() {
        let (n_in, n_out) = (layer.weight.rows(), layer.weight.cols());
        let mut a = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = layer.bias[j];
            for i in 0..n_in {
                s += h[i] * layer.weight[(i, j)];
            }
            a[j] = s;
        }
        h = a.iter().map(|&v| act(layer.activation, v)).collect();
        pres.push(a);
    }
    pres
}

pub fn naive_forward_row(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let pres = naive_pre_activations(mlp, x);
    let last = mlp.layers().last().unwrap().activation;
    pres.last().unwrap().iter().map(|&a| act(last, a)).collect()
}

pub fn naive_forward(mlp: &Mlp, x: &Matrix) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..x.rows())
        .map(|r| naive_forward_row(mlp, x.row(r)))
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

/// Gradient of a scalar-output network with respect to its input row.
pub fn naive_input_gradient(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let pres = naive_pre_activations(mlp, x);
    let mut delta = vec![1.0];
    for (l, layer) in mlp.layers().iter().enumerate().rev() {
        let e: Vec<f64> = delta
            .iter()
            .zip(&pres[l])
            .map(|(d, &a)| d * act_d(layer.activation, a))
            .collect();
        let n_in = layer.weight.rows();
        delta = (0..n_in)
            .map(|i| (0..e.len()).map(|j| e[j] * layer.weight[(i, j)]).sum())
            .collect();
    }
    delta
}

/// Gradient penalty evaluated through the straight-line input gradient.
pub fn naive_penalty(mlp: &Mlp, x: &Matrix, lambda: f64) -> f64 {
    let mut total = 0.0;
    for r in 0..x.rows() {
        let g = naive_input_gradient(mlp, x.row(r));
        let norm = (g.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
        total += (norm - 1.0).powi(2);
    }
    lambda * total / x.rows() as f64
}

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut RngStream) -> Matrix {
    rng.normal_matrix(rows, cols).scaled(scale)
}

pub fn random_mlp(
    widths: &[usize],
    hidden: Activation,
    output: Activation,
    rng: &mut RngStream,
) -> Mlp {
    let n = widths.len() - 1;
    let layers = (0..n)
        .map(|i| Layer {
            weight: random_matrix(widths[i], widths[i + 1], 0.8, rng),
            bias: (0..widths[i + 1]).map(|_| 0.3 * rng.normal()).collect(),
            activation: if i + 1 == n { output } else { hidden },
        })
        .collect();
    Mlp::new(layers).unwrap()
}

/// Smallest |pre-activation| over all non-smooth units; finite differences
/// are only meaningful when this is well away from the kink.
pub fn kink_margin(mlp: &Mlp, x: &Matrix) -> f64 {
    let mut margin = f64::INFINITY;
    for r in 0..x.rows() {
        for (layer, pre) in mlp
            .layers()
            .iter()
            .zip(naive_pre_activations(mlp, x.row(r)))
        {
            if matches!(
                layer.activation,
                Activation::Relu | Activation::LeakyRelu { .. }
            ) {
                for a in pre {
                    margin = margin.min(a.abs());
                }
            }
        }
    }
    margin
}

/// Central difference of `f` with respect to every parameter of `mlp`, in
/// the same order as `Mlp::flatten`.
pub fn fd_params(mlp: &Mlp, h: f64, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let n = mlp.param_count();
    (0..n)
        .map(|k| {
            let mut plus = mlp.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            let mut minus = mlp.clone();
            *minus.params_mut().nth(k).unwrap() -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

pub fn fd_input(x: &Matrix, h: f64, f: impl Fn(&Matrix) -> f64) -> Vec<f64> {
    (0..x.data().len())
        .map(|k| {
            let mut plus = x.clone();
            plus.data_mut()[k] += h;
            let mut minus = x.clone();
            minus.data_mut()[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Draws a network of at most 3 layers / 16 units and an input batch that
/// keeps every piecewise-linear unit at least `margin` from its kink.
pub fn random_case(
    hidden: Activation,
    output: Activation,
    rng: &mut RngStream,
    margin: f64,
) -> (Mlp, Matrix) {
    loop {
        let depth = 1 + (rng.uniform() * 3.0) as usize;
        let mut widths = vec![1 + (rng.uniform() * 6.0) as usize];
        for _ in 1..depth {
            widths.push(2 + (rng.uniform() * 15.0) as usize);
        }
        widths.push(1 + (rng.uniform() * 3.0) as usize);
        let mlp = random_mlp(&widths, hidden, output, rng);
        let x = random_matrix(3, widths[0], 1.0, rng);
        if kink_margin(&mlp, &x) > margin {
            return (mlp, x);
        }
    }
}

/// Scalar-output variant of [`random_case`] for gradient-penalty checks.
pub fn random_critic(hidden: Activation, rng: &mut RngStream, margin: f64) -> (Mlp, Matrix) {
    loop {
        let d = 2 + (rng.uniform() * 4.0) as usize;
        let w = 3 + (rng.uniform() * 8.0) as usize;
        let mlp = random_mlp(&[d, w, 1], hidden, Activation::Identity, rng);
        let x = random_matrix(4, d, 1.0, rng);
        if kink_margin(&mlp, &x) > margin {
            return (mlp, x);
        }
    }
}

pub fn red_wine_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/winequality-red.csv")
}

pub fn red_wine() -> vflgan_core::data::TabularDataset {
    let schema = vflgan_core::data::red_wine_schema();
    vflgan_core::data::load_csv(&red_wine_path(), &schema).unwrap()
}
