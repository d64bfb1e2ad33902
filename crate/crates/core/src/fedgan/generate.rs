use serde::{Deserialize, Serialize};

use super::messages::ProtocolMessage;
use crate::data::{merge_parties, Encoder, VerticalSplit};
use crate::error::{shape_err, Error, Result};
use crate::nn::{Matrix, Mlp, OutputHead};
use crate::rng::RngStream;

/// A party's trained generator and its output layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyGenerator {
    pub mlp: Mlp,
    pub head: OutputHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generators {
    pub latent_dim: usize,
    pub parties: Vec<PartyGenerator>,
}

impl Generators {
    pub fn validate(&self) -> Result<()> {
        if self.parties.is_empty() {
            return Err(Error::InvalidArgument("no generators".into()));
        }
        for (i, p) in self.parties.iter().enumerate() {
            if p.mlp.input_width() != self.latent_dim {
                return Err(shape_err(
                    "generator latent width",
                    self.latent_dim,
                    p.mlp.input_width(),
                ));
            }
            if p.mlp.output_width() != p.head.width() {
                return Err(Error::InvalidArgument(format!(
                    "generator {i} emits {} columns, head expects {}",
                    p.mlp.output_width(),
                    p.head.width()
                )));
            }
        }
        Ok(())
    }

    pub fn party_widths(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.head.width()).collect()
    }

    pub fn width(&self) -> usize {
        self.party_widths().iter().sum()
    }
}

/// A party's share of an inference round: it derives the shared latent
/// batch from `rng` and its own Gumbel stream.
pub fn party_synthesize(
    generator: &PartyGenerator,
    party: usize,
    latent_dim: usize,
    n: usize,
    rng: &RngStream,
) -> Result<ProtocolMessage> {
    let z = rng.child("shared", 0, 0).normal_matrix(n, latent_dim);
    let raw = generator.mlp.predict(&z)?;
    let rows = generator
        .head
        .forward(&raw, Some(&mut rng.child("gumbel", party as u64, 0)))?;
    Ok(ProtocolMessage::SyntheticPartUp { party, rows })
}

/// `n` synthetic rows, party blocks concatenated in party order. Every party
/// consumes the same latent batch.
pub fn generate(generators: &Generators, n: usize, rng: &RngStream) -> Result<Matrix> {
    generators.validate()?;
    let parts = generators
        .parties
        .iter()
        .enumerate()
        .map(|(i, g)| party_synthesize(g, i, generators.latent_dim, n, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut blocks = Vec::with_capacity(parts.len());
    for (i, msg) in parts.iter().enumerate() {
        match msg {
            ProtocolMessage::SyntheticPartUp { party, rows } if *party == i => blocks.push(rows),
            other => {
                return Err(Error::Protocol(format!(
                    "expected SyntheticPartUp from party {i}, got {}",
                    other.kind()
                )))
            }
        }
    }
    Matrix::hcat(&blocks)
}

/// Splits a party-ordered matrix back into per-party blocks.
pub fn split_party_blocks(m: &Matrix, widths: &[usize]) -> Result<Vec<Matrix>> {
    let total: usize = widths.iter().sum();
    if total != m.cols() {
        return Err(shape_err("split_party_blocks", total, m.cols()));
    }
    let mut start = 0;
    Ok(widths
        .iter()
        .map(|&w| {
            let b = m.col_range(start..start + w);
            start += w;
            b
        })
        .collect())
}

/// `n` hardened synthetic rows in schema column order: one-hot blocks are
/// reduced to their argmax. A single generator covering every party is
/// scattered back through the split's column order.
pub fn synthesize_table(
    generators: &Generators,
    split: &VerticalSplit,
    encoder: &Encoder,
    n: usize,
    rng: &RngStream,
) -> Result<Matrix> {
    let raw = generate(generators, n, rng)?;
    let blocks = split_party_blocks(&raw, &generators.party_widths())?
        .iter()
        .zip(&generators.parties)
        .map(|(b, g)| g.head.harden(b))
        .collect::<Result<Vec<_>>>()?;
    if blocks.len() == split.party_count() {
        return merge_parties(&blocks, split, encoder);
    }
    let joined = Matrix::hcat(&blocks.iter().collect::<Vec<_>>())?;
    let order = split.column_order(encoder)?;
    if order.len() != joined.cols() {
        return Err(shape_err("synthesize_table", order.len(), joined.cols()));
    }
    let mut out = Matrix::zeros(n, joined.cols());
    for (k, &c) in order.iter().enumerate() {
        for r in 0..n {
            out[(r, c)] = joined[(r, k)];
        }
    }
    Ok(out)
}
