use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Identity,
}

impl Activation {
    pub fn leaky() -> Self {
        Activation::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
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

    /// First derivative given pre-activation `a` and output `h = apply(a)`.
    #[inline]
    pub fn derivative(self, a: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if a > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative; zero for the piecewise-linear kinds (away from the kink).
    #[inline]
    pub fn second_derivative(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * h * (1.0 - h * h),
            _ => 0.0,
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

/// Dense layer computing `act(x·W + b)` for row-batch `x`; `W` is `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_width(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Intermediates of one forward pass. `inputs[l]` feeds layer `l`;
/// `pre[l]` and `post[l]` are its pre- and post-activation values.
#[derive(Debug, Clone)]
pub struct Tape {
    pub inputs: Vec<Matrix>,
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.inputs[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn norm_sq(&self) -> f64 {
        self.weight.frobenius_sq() + self.bias.iter().map(|b| b * b).sum::<f64>()
    }

    pub fn scale(&mut self, k: f64) {
        self.weight.scale(k);
        self.bias.iter_mut().for_each(|b| *b *= k);
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weight.data().iter().chain(self.bias.iter()).copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weight
            .data_mut()
            .iter_mut()
            .chain(self.bias.iter_mut())
    }
}

/// Per-layer gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradSet {
    pub layers: Vec<LayerGrad>,
}

impl GradSet {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradSet) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(shape_err(
                "GradSet::add_assign",
                self.layers.len(),
                other.layers.len(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight)?;
            if a.bias.len() != b.bias.len() {
                return Err(shape_err("GradSet bias", a.bias.len(), b.bias.len()));
            }
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        self.layers.iter_mut().for_each(|l| l.scale(k));
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(LayerGrad::norm_sq)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.values().all(f64::is_finite))
    }

    pub fn is_congruent(&self, mlp: &Mlp) -> bool {
        self.layers.len() == mlp.layers.len()
            && self
                .layers
                .iter()
                .zip(&mlp.layers)
                .all(|(g, l)| g.weight.shape() == l.weight.shape() && g.bias.len() == l.bias.len())
    }

    /// Splits gradients of a chained network back into its two parts.
    pub fn split_at(mut self, first_len: usize) -> (GradSet, GradSet) {
        let rest = self.layers.split_off(first_len);
        (self, GradSet { layers: rest })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.values()).collect()
    }

    pub fn max_abs_diff(&self, other: &GradSet) -> f64 {
        let (a, b) = (self.flatten(), other.flatten());
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(shape_err(
                    "Mlp layer chain",
                    format!("layer {} input {}", i + 1, pair[0].output_width()),
                    pair[1].input_width(),
                ));
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_width() {
                return Err(shape_err("Mlp bias", l.output_width(), l.bias.len()));
            }
            if !l.weight.is_finite() || !l.bias.iter().all(|b| b.is_finite()) {
                return Err(Error::InvalidArgument("non-finite weights".into()));
            }
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "an Mlp needs at least one layer".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases. `widths`
    /// lists every layer width including input and output.
    pub fn init(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least input and output widths".into(),
            ));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (widths[i], widths[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = || (2.0 * rng.uniform() - 1.0) * bound;
                let weight: Vec<f64> = (0..fan_in * fan_out).map(|_| draw()).collect();
                let bias: Vec<f64> = (0..fan_out).map(|_| draw()).collect();
                Layer {
                    weight: Matrix::from_vec(fan_in, fan_out, weight).unwrap(),
                    bias,
                    activation: if i + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().output_width()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.len())
            .sum()
    }

    /// `self` followed by `next`.
    pub fn chain(&self, next: &Mlp) -> Result<Mlp> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        Mlp::new(layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.data().iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.data_mut().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Tape)> {
        if batch.cols() != self.input_width() {
            return Err(shape_err("Mlp::forward", self.input_width(), batch.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut a = x.matmul(&layer.weight)?;
            a.add_row_vector(&layer.bias);
            let act = layer.activation;
            let h = a.map(|v| act.apply(v));
            inputs.push(x);
            pre.push(a);
            x = h.clone();
            post.push(h);
        }
        Ok((x, Tape { inputs, pre, post }))
    }

    /// Output only; skips recording intermediates.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_width() {
            return Err(shape_err("Mlp::predict", self.input_width(), batch.cols()));
        }
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut a = x.matmul(&layer.weight)?;
            a.add_row_vector(&layer.bias);
            let act = layer.activation;
            x = a.map(|v| act.apply(v));
        }
        Ok(x)
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        let n = self.layers.len();
        if tape.pre.len() != n || tape.inputs.len() != n || tape.post.len() != n {
            return Err(shape_err("stale tape (layer count)", n, tape.pre.len()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let rows = tape.inputs[0].rows();
            if tape.inputs[l].shape() != (rows, layer.input_width())
                || tape.pre[l].shape() != (rows, layer.output_width())
            {
                return Err(shape_err(
                    "stale tape",
                    format!("layer {l} {}x{}", layer.input_width(), layer.output_width()),
                    format!("{:?}", tape.pre[l].shape()),
                ));
            }
        }
        Ok(())
    }

    /// Reverse pass. Returns parameter gradients and the gradient with respect
    /// to the forward input, for the scalar whose output-gradient is `output_grad`.
    pub fn backward(&self, tape: &Tape, output_grad: &Matrix) -> Result<(GradSet, Matrix)> {
        self.check_tape(tape)?;
        let last = tape.output();
        if output_grad.shape() != last.shape() {
            return Err(shape_err(
                "Mlp::backward output_grad",
                format!("{:?}", last.shape()),
                format!("{:?}", output_grad.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let e = tape.pre[l].zip_map(&tape.post[l], |a, h| act.derivative(a, h))?;
            let e = e.zip_map(&delta, |d, g| d * g)?;
            let dw = tape.inputs[l].t_matmul(&e)?;
            let db = e.column_sums();
            delta = e.matmul_t(&layer.weight)?;
            grads.push(LayerGrad {
                weight: dw,
                bias: db,
            });
        }
        grads.reverse();
        Ok((GradSet { layers: grads }, delta))
    }

    /// Input gradient only (parameter gradients are not formed).
    pub fn input_grad(&self, tape: &Tape, output_grad: &Matrix) -> Result<Matrix> {
        self.check_tape(tape)?;
        let mut delta = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let e = tape.pre[l].zip_map(&tape.post[l], |a, h| act.derivative(a, h))?;
            let e = e.zip_map(&delta, |d, g| d * g)?;
            delta = e.matmul_t(&layer.weight)?;
        }
        Ok(delta)
    }
}
