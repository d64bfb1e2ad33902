use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, Schema, TabularDataset, Value};
use crate::error::{shape_err, Error, Result};
use crate::nn::{argmax, HeadBlock, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// `(v − mean) / std`; integer attributes are rounded when decoded.
    Standardize {
        mean: f64,
        std: f64,
        integer: bool,
    },
    OneHot {
        width: usize,
    },
    /// One-hot over the integer values observed when fitting.
    IntegerOneHot {
        levels: Vec<f64>,
    },
}

impl ColumnEncoding {
    pub fn width(&self) -> usize {
        match self {
            ColumnEncoding::Standardize { .. } => 1,
            ColumnEncoding::OneHot { width } => *width,
            ColumnEncoding::IntegerOneHot { levels } => levels.len(),
        }
    }

    pub fn is_one_hot(&self) -> bool {
        !matches!(self, ColumnEncoding::Standardize { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEncoding {
    pub start: usize,
    pub encoding: ColumnEncoding,
}

impl AttributeEncoding {
    pub fn span(&self) -> Range<usize> {
        self.start..self.start + self.encoding.width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub schema: Schema,
    pub columns: Vec<AttributeEncoding>,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub matrix: Matrix,
    pub encoder: Encoder,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            matrix: self.matrix.select_rows(idx),
            encoder: self.encoder.clone(),
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn fit_encoder(ds: &TabularDataset) -> Result<Encoder> {
    let schema = ds.schema().clone();
    if ds.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit an encoder on an empty dataset".into(),
        ));
    }
    let mut columns = Vec::with_capacity(schema.len());
    let mut start = 0;
    for (i, attr) in schema.attributes.iter().enumerate() {
        let encoding = match &attr.kind {
            AttributeKind::Categorical { categories } => ColumnEncoding::OneHot {
                width: categories.len(),
            },
            AttributeKind::Integer { one_hot: true } => {
                let mut levels = ds.numeric_column(i).expect("validated numeric column");
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                ColumnEncoding::IntegerOneHot { levels }
            }
            AttributeKind::Continuous | AttributeKind::Integer { one_hot: false } => {
                let col = ds.numeric_column(i).expect("validated numeric column");
                let (mean, std) = mean_std(&col);
                if !(std > 0.0) {
                    return Err(Error::ConstantColumn(attr.name.clone()));
                }
                ColumnEncoding::Standardize {
                    mean,
                    std,
                    integer: !matches!(attr.kind, AttributeKind::Continuous),
                }
            }
        };
        let w = encoding.width();
        columns.push(AttributeEncoding { start, encoding });
        start += w;
    }
    Ok(Encoder {
        schema,
        columns,
        width: start,
    })
}

impl Encoder {
    pub fn encode(&self, ds: &TabularDataset) -> Result<EncodedDataset> {
        if ds.schema() != &self.schema {
            return Err(Error::Schema(
                "dataset schema differs from the encoder's".into(),
            ));
        }
        let mut m = Matrix::zeros(ds.len(), self.width);
        for (r, row) in ds.rows().iter().enumerate() {
            let out = m.row_mut(r);
            for (v, col) in row.iter().zip(&self.columns) {
                match (&col.encoding, *v) {
                    (ColumnEncoding::Standardize { mean, std, .. }, Value::Number(x)) => {
                        out[col.start] = (x - mean) / std;
                    }
                    (ColumnEncoding::OneHot { .. }, Value::Category(c)) => {
                        out[col.start + c] = 1.0;
                    }
                    (ColumnEncoding::IntegerOneHot { levels }, Value::Number(x)) => {
                        let k = levels.iter().position(|&l| l == x).ok_or_else(|| {
                            Error::Schema(format!("integer value {x} was not seen when fitting"))
                        })?;
                        out[col.start + k] = 1.0;
                    }
                    _ => return Err(Error::Schema(format!("row {r}: value kind mismatch"))),
                }
            }
        }
        Ok(EncodedDataset {
            matrix: m,
            encoder: self.clone(),
        })
    }

    /// Inverse of [`Encoder::encode`]. One-hot blocks (soft or hard) decode
    /// to their argmax; numerics are de-standardized.
    pub fn decode(&self, matrix: &Matrix) -> Result<TabularDataset> {
        if matrix.cols() != self.width {
            return Err(shape_err("Encoder::decode", self.width, matrix.cols()));
        }
        let rows = (0..matrix.rows())
            .map(|r| {
                let row = matrix.row(r);
                self.columns
                    .iter()
                    .map(|col| match &col.encoding {
                        ColumnEncoding::Standardize { mean, std, integer } => {
                            let v = row[col.start] * std + mean;
                            Value::Number(if *integer { v.round() } else { v })
                        }
                        ColumnEncoding::OneHot { .. } => Value::Category(argmax(&row[col.span()])),
                        ColumnEncoding::IntegerOneHot { levels } => {
                            Value::Number(levels[argmax(&row[col.span()])])
                        }
                    })
                    .collect()
            })
            .collect();
        TabularDataset::new(self.schema.clone(), rows)
    }

    /// Encoded columns of the listed attributes, in the listed order.
    pub fn columns_of(&self, attrs: &[usize]) -> Vec<usize> {
        attrs.iter().flat_map(|&a| self.columns[a].span()).collect()
    }

    /// Generator output layout for the listed attributes: identity for
    /// standardized columns, softmax for one-hot blocks.
    pub fn head_blocks(&self, attrs: &[usize]) -> Vec<HeadBlock> {
        let mut blocks: Vec<HeadBlock> = Vec::new();
        for &a in attrs {
            let enc = &self.columns[a].encoding;
            if enc.is_one_hot() {
                blocks.push(HeadBlock::Softmax { width: enc.width() });
            } else if let Some(HeadBlock::Identity { width }) = blocks.last_mut() {
                *width += 1;
            } else {
                blocks.push(HeadBlock::Identity { width: 1 });
            }
        }
        blocks
    }
}

pub fn fit_encoder_and_encode(ds: &TabularDataset) -> Result<EncodedDataset> {
    fit_encoder(ds)?.encode(ds)
}
