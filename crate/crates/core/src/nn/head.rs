use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{shape_err, Error, Result};
use crate::rng::RngStream;

fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )))
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise `softmax(logits / τ)`.
pub fn softmax_rows(logits: &Matrix, temperature: f64) -> Result<Matrix> {
    check_temperature(temperature)?;
    let mut out = logits.scaled(1.0 / temperature);
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

/// Row-wise `softmax((logits + g) / τ)` with standard Gumbel noise `g`.
pub fn gumbel_softmax(logits: &Matrix, temperature: f64, rng: &mut RngStream) -> Result<Matrix> {
    check_temperature(temperature)?;
    let mut noisy = logits.clone();
    for v in noisy.data_mut() {
        *v += rng.gumbel();
    }
    softmax_rows(&noisy, temperature)
}

/// Backward through a tempered softmax given its output `y`.
pub fn softmax_backward(y: &Matrix, grad_y: &Matrix, temperature: f64) -> Result<Matrix> {
    y.check_same_shape(grad_y, "softmax_backward")?;
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, gr) = (y.row(r), grad_y.row(r));
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((o, a), b) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
            *o = a * (b - dot) / temperature;
        }
    }
    Ok(out)
}

/// How a contiguous run of generator output columns is turned into
/// encoded data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadBlock {
    Identity { width: usize },
    Tanh { width: usize },
    Softmax { width: usize },
}

impl HeadBlock {
    pub fn width(self) -> usize {
        match self {
            HeadBlock::Identity { width }
            | HeadBlock::Tanh { width }
            | HeadBlock::Softmax { width } => width,
        }
    }
}

/// Output activation layout of one generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub blocks: Vec<HeadBlock>,
    pub temperature: f64,
}

impl OutputHead {
    pub fn new(blocks: Vec<HeadBlock>, temperature: f64) -> Result<Self> {
        check_temperature(temperature)?;
        if blocks.iter().any(|b| b.width() == 0) {
            return Err(Error::InvalidArgument("empty output block".into()));
        }
        Ok(Self {
            blocks,
            temperature,
        })
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.width()).sum()
    }

    /// Applies the head. Softmax blocks draw Gumbel noise from `rng` when it
    /// is given and use a plain tempered softmax otherwise.
    pub fn forward(&self, raw: &Matrix, mut rng: Option<&mut RngStream>) -> Result<Matrix> {
        if raw.cols() != self.width() {
            return Err(shape_err("OutputHead::forward", self.width(), raw.cols()));
        }
        let mut out = raw.clone();
        let mut start = 0;
        for block in &self.blocks {
            let w = block.width();
            match block {
                HeadBlock::Identity { .. } => {}
                HeadBlock::Tanh { .. } => {
                    for r in 0..out.rows() {
                        out.row_mut(r)[start..start + w]
                            .iter_mut()
                            .for_each(|v| *v = v.tanh());
                    }
                }
                HeadBlock::Softmax { .. } => {
                    for r in 0..out.rows() {
                        let seg = &mut out.row_mut(r)[start..start + w];
                        if let Some(rng) = rng.as_deref_mut() {
                            seg.iter_mut().for_each(|v| *v += rng.gumbel());
                        }
                        seg.iter_mut().for_each(|v| *v /= self.temperature);
                        softmax_in_place(seg);
                    }
                }
            }
            start += w;
        }
        Ok(out)
    }

    /// Gradient with respect to the raw generator output, given the head
    /// output `y` and the gradient with respect to it.
    pub fn backward(&self, y: &Matrix, grad_y: &Matrix) -> Result<Matrix> {
        y.check_same_shape(grad_y, "OutputHead::backward")?;
        if y.cols() != self.width() {
            return Err(shape_err("OutputHead::backward", self.width(), y.cols()));
        }
        let mut out = grad_y.clone();
        let mut start = 0;
        for block in &self.blocks {
            let w = block.width();
            for r in 0..y.rows() {
                let yr = &y.row(r)[start..start + w];
                let gr = &grad_y.row(r)[start..start + w];
                let or = &mut out.row_mut(r)[start..start + w];
                match block {
                    HeadBlock::Identity { .. } => {}
                    HeadBlock::Tanh { .. } => {
                        for ((o, a), g) in or.iter_mut().zip(yr).zip(gr) {
                            *o = g * (1.0 - a * a);
                        }
                    }
                    HeadBlock::Softmax { .. } => {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, a), g) in or.iter_mut().zip(yr).zip(gr) {
                            *o = a * (g - dot) / self.temperature;
                        }
                    }
                }
            }
            start += w;
        }
        Ok(out)
    }

    /// Replaces each softmax block by the one-hot of its argmax.
    pub fn harden(&self, y: &Matrix) -> Result<Matrix> {
        if y.cols() != self.width() {
            return Err(shape_err("OutputHead::harden", self.width(), y.cols()));
        }
        let mut out = y.clone();
        let mut start = 0;
        for block in &self.blocks {
            let w = block.width();
            if let HeadBlock::Softmax { .. } = block {
                for r in 0..out.rows() {
                    let seg = &mut out.row_mut(r)[start..start + w];
                    let best = argmax(seg);
                    seg.iter_mut()
                        .enumerate()
                        .for_each(|(i, v)| *v = (i == best) as u8 as f64);
                }
            }
            start += w;
        }
        Ok(out)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
