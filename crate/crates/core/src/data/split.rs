use serde::{Deserialize, Serialize};

use super::encoder::{EncodedDataset, Encoder};
use crate::error::{shape_err, Error, Result};
use crate::nn::Matrix;
use crate::rng::RngStream;

/// Attribute indices held by each party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerticalSplit {
    pub parties: Vec<Vec<usize>>,
}

impl VerticalSplit {
    pub fn new(parties: Vec<Vec<usize>>) -> Self {
        Self { parties }
    }

    /// Consecutive attribute runs of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let mut start = 0;
        let parties = sizes
            .iter()
            .map(|&s| {
                let p: Vec<usize> = (start..start + s).collect();
                start += s;
                p
            })
            .collect();
        Self { parties }
    }

    pub fn party_count(&self) -> usize {
        self.parties.len()
    }

    /// Checks that the parties partition `0..n_attributes`.
    pub fn validate(&self, n_attributes: usize) -> Result<()> {
        if self.parties.is_empty() {
            return Err(Error::Split("no parties".into()));
        }
        let mut owner = vec![None; n_attributes];
        for (p, attrs) in self.parties.iter().enumerate() {
            if attrs.is_empty() {
                return Err(Error::Split(format!("party {p} holds no attributes")));
            }
            for &a in attrs {
                if a >= n_attributes {
                    return Err(Error::Split(format!(
                        "party {p} lists attribute {a}, schema has {n_attributes}"
                    )));
                }
                if let Some(q) = owner[a] {
                    return Err(Error::Split(format!(
                        "attribute {a} assigned to parties {q} and {p}"
                    )));
                }
                owner[a] = Some(p);
            }
        }
        if let Some(a) = owner.iter().position(Option::is_none) {
            return Err(Error::Split(format!(
                "attribute {a} is not assigned to any party"
            )));
        }
        Ok(())
    }

    /// Encoded column indices per party.
    pub fn party_columns(&self, enc: &Encoder) -> Result<Vec<Vec<usize>>> {
        self.validate(enc.schema.len())?;
        Ok(self
            .parties
            .iter()
            .map(|attrs| enc.columns_of(attrs))
            .collect())
    }

    /// Encoded column order obtained by concatenating party views.
    pub fn column_order(&self, enc: &Encoder) -> Result<Vec<usize>> {
        Ok(self.party_columns(enc)?.concat())
    }
}

/// Per-party column views of an encoded dataset.
pub fn vertical_split(ds: &EncodedDataset, split: &VerticalSplit) -> Result<Vec<Matrix>> {
    Ok(split
        .party_columns(&ds.encoder)?
        .iter()
        .map(|cols| ds.matrix.select_cols(cols))
        .collect())
}

/// Reassembles party blocks into the encoder's column order.
pub fn merge_parties(parts: &[Matrix], split: &VerticalSplit, enc: &Encoder) -> Result<Matrix> {
    let cols = split.party_columns(enc)?;
    if parts.len() != cols.len() {
        return Err(shape_err(
            "merge_parties party count",
            cols.len(),
            parts.len(),
        ));
    }
    let rows = parts.first().map_or(0, Matrix::rows);
    let mut out = Matrix::zeros(rows, enc.width);
    for (part, cols) in parts.iter().zip(&cols) {
        if part.cols() != cols.len() || part.rows() != rows {
            return Err(shape_err(
                "merge_parties block",
                format!("{rows}x{}", cols.len()),
                format!("{}x{}", part.rows(), part.cols()),
            ));
        }
        for r in 0..rows {
            let src = part.row(r).to_vec();
            let dst = out.row_mut(r);
            for (v, &c) in src.iter().zip(cols) {
                dst[c] = *v;
            }
        }
    }
    Ok(out)
}

/// `batch` distinct indices drawn uniformly without replacement from
/// `0..n`, returned in ascending order.
pub fn subsample_batch(n: usize, batch: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if batch > n {
        return Err(Error::InvalidArgument(format!(
            "batch size {batch} exceeds dataset size {n}"
        )));
    }
    let mut idx = rand::seq::index::sample(rng, n, batch).into_vec();
    idx.sort_unstable();
    Ok(idx)
}
