use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attack::AttackConfig;
use super::features::{extract_encoded, extract_matrix, FeatureKind, FeatureVector};
use crate::data::{EncodedDataset, Encoder, VerticalSplit};
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::fedgan::{party_data, synthesize_table, train, GanConfig, TrainOutput, Variant};
use crate::nn::Matrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditMethod {
    /// Attack on shadow synthetic datasets.
    Assd,
    /// Attack on shadow intermediate features.
    Asif,
}

/// Something that can be trained on an encoded table. Rows are in schema
/// column order on both sides.
pub trait ShadowTrainer: Sync {
    /// Trains on `data` and returns `n` synthetic rows.
    fn synthesize(&self, data: &Matrix, n: usize, rng: &RngStream) -> Result<Matrix>;

    /// Trains on `data` and returns the per-record intermediate features of
    /// `probe`, party blocks side by side.
    fn intermediate_features(
        &self,
        data: &Matrix,
        probe: &Matrix,
        rng: &RngStream,
    ) -> Result<Matrix>;
}

/// Shadow trainer running the federated GAN.
#[derive(Debug, Clone)]
pub struct GanShadowTrainer {
    pub encoder: Encoder,
    pub split: VerticalSplit,
    pub variant: Variant,
    pub gan: GanConfig,
    pub dp: Option<DpConfig>,
}

impl GanShadowTrainer {
    fn fit(&self, data: &Matrix, rng: &RngStream) -> Result<TrainOutput> {
        let ds = EncodedDataset {
            matrix: data.clone(),
            encoder: self.encoder.clone(),
        };
        let parts = party_data(&ds, &self.split, self.gan.temperature)?;
        train(
            self.variant,
            &parts,
            &self.gan,
            self.dp.as_ref(),
            &rng.child("train", 0, 0),
        )
    }
}

impl ShadowTrainer for GanShadowTrainer {
    fn synthesize(&self, data: &Matrix, n: usize, rng: &RngStream) -> Result<Matrix> {
        let out = self.fit(data, rng)?;
        synthesize_table(
            &out.best,
            &self.split,
            &self.encoder,
            n,
            &rng.child("synth", 0, 0),
        )
    }

    fn intermediate_features(
        &self,
        data: &Matrix,
        probe: &Matrix,
        rng: &RngStream,
    ) -> Result<Matrix> {
        let out = self.fit(data, rng)?;
        let cols = self.split.party_columns(&self.encoder)?;
        let feats = match self.variant {
            Variant::Central => {
                let order = self.split.column_order(&self.encoder)?;
                vec![out.feature_extractors[0].predict(&probe.select_cols(&order))?]
            }
            _ => out
                .feature_extractors
                .iter()
                .zip(&cols)
                .map(|(d1, c)| d1.predict(&probe.select_cols(c)))
                .collect::<Result<Vec<_>>>()?,
        };
        Matrix::hcat(&feats.iter().collect::<Vec<_>>())
    }
}

/// `data` without row `target`.
fn leave_out(data: &Matrix, target: usize) -> Matrix {
    let keep: Vec<usize> = (0..data.rows()).filter(|&r| r != target).collect();
    data.select_rows(&keep)
}

fn check_target(data: &EncodedDataset, target: usize) -> Result<()> {
    if target >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} outside a table of {} rows",
            data.len()
        )));
    }
    Ok(())
}

/// Runs `job` for every (world, shadow) pair; world 0 trains without the
/// target. Shadow `j` of world `b` draws from child `("shadow", b, j)`.
fn run_shadows<F>(
    data: &EncodedDataset,
    target: usize,
    cfg: &AttackConfig,
    rng: &RngStream,
    job: F,
) -> Result<Vec<FeatureVector>>
where
    F: Fn(&Matrix, &RngStream) -> Result<Vec<(FeatureKind, Vec<f64>)>> + Sync,
{
    check_target(data, target)?;
    cfg.validate()?;
    let worlds = [leave_out(&data.matrix, target), data.matrix.clone()];
    let jobs: Vec<(u8, usize)> = (0..2u8)
        .flat_map(|b| (0..cfg.shadows).map(move |j| (b, j)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(b, j)| {
            let stream = rng.child("shadow", b as u64, j as u64);
            job(&worlds[b as usize], &stream)
                .map(|fs| {
                    fs.into_iter()
                        .map(|(kind, values)| FeatureVector {
                            values,
                            world: b,
                            shadow: j,
                            kind,
                        })
                        .collect::<Vec<_>>()
                })
                .map_err(|e| Error::Shadow {
                    world: b,
                    index: j,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Shadow synthetic datasets of `data.len()` rows per world, summarized with
/// every configured feature kind.
pub fn train_shadows_assd(
    data: &EncodedDataset,
    target: usize,
    cfg: &AttackConfig,
    trainer: &dyn ShadowTrainer,
    rng: &RngStream,
) -> Result<Vec<FeatureVector>> {
    let n = data.len();
    run_shadows(data, target, cfg, rng, |world, stream| {
        let synth = trainer.synthesize(world, n, stream)?;
        cfg.kinds
            .iter()
            .map(|&k| Ok((k, extract_encoded(k, &data.encoder, &synth)?)))
            .collect()
    })
}

/// Shadow intermediate features of the full table per world, summarized
/// column-wise with every configured feature kind.
pub fn train_shadows_asif(
    data: &EncodedDataset,
    target: usize,
    cfg: &AttackConfig,
    trainer: &dyn ShadowTrainer,
    rng: &RngStream,
) -> Result<Vec<FeatureVector>> {
    run_shadows(data, target, cfg, rng, |world, stream| {
        let feats = trainer.intermediate_features(world, &data.matrix, stream)?;
        cfg.kinds
            .iter()
            .map(|&k| Ok((k, extract_matrix(k, &feats)?)))
            .collect()
    })
}

/// One CSV per feature kind: `world, shadow, f0, f1, ...`.
pub fn write_feature_csv(vectors: &[FeatureVector], kind: FeatureKind, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let rows: Vec<&FeatureVector> = vectors.iter().filter(|v| v.kind == kind).collect();
    let width = rows.first().map_or(0, |v| v.values.len());
    let mut header = vec!["world".to_string(), "shadow".to_string()];
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for v in rows {
        let mut rec = vec![v.world.to_string(), v.shadow.to_string()];
        rec.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
