//! Reproducible, splittable random streams.
//!
//! A [`RngStream`] is a ChaCha12 keystream addressed by `(seed, stream id)`.
//! The keystream is counter based, so two streams never influence each other
//! and a stream can be reconstructed from its address alone. Named child
//! streams hash `(seed, label, party, index)` into a 64-bit stream id.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::nn::Matrix;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Root stream for a run.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Stream addressed by a role label, party index and auxiliary index
    /// (shadow index, epoch, tree number...).
    pub fn derive(seed: u64, label: &str, party: u64, index: u64) -> Self {
        Self::new(seed, stream_id(seed, label, party, index))
    }

    /// Child of this stream. Children depend on this stream's address, never
    /// on how far it has been consumed.
    pub fn child(&self, label: &str, party: u64, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.stream.to_le_bytes());
        h.update(label.as_bytes());
        let base = u64::from_le_bytes(h.finalize()[..8].try_into().unwrap());
        Self::new(self.seed, stream_id(self.seed ^ base, label, party, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Standard Gumbel draw, `-ln(-ln U)` with `U` in `(0, 1)`.
    pub fn gumbel(&mut self) -> f64 {
        let mut u = self.uniform();
        while u <= 0.0 {
            u = self.uniform();
        }
        -(-u.ln()).ln()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| self.normal()).collect();
        Matrix::from_vec(rows, cols, data).expect("length matches")
    }

    pub fn uniform_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// 64-bit stream id: the first eight bytes of SHA-256 over the address.
pub fn stream_id(seed: u64, label: &str, party: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(party.to_le_bytes());
    h.update(index.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
