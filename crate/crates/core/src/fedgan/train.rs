use std::path::Path;

use serde::{Deserialize, Serialize};

use super::common::DiscReport;
use super::config::{GanConfig, Variant};
use super::generate::{generate, Generators};
use super::local::LocalSystem;
use super::vfl::VflSystem;
use crate::data::{vertical_split, EncodedDataset, VerticalSplit};
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::metrics::{dataset_stats, frechet_distance};
use crate::nn::{HeadBlock, Matrix, Mlp, OutputHead};
use crate::rng::RngStream;

/// A party's encoded columns and the generator output layout for them.
#[derive(Debug, Clone)]
pub struct PartyData {
    pub data: Matrix,
    pub head: OutputHead,
}

impl PartyData {
    /// All parties side by side, as one table.
    pub fn concat(parts: &[PartyData]) -> Result<PartyData> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("no parties".into()))?;
        let blocks: Vec<HeadBlock> = parts
            .iter()
            .flat_map(|p| p.head.blocks.iter().copied())
            .collect();
        Ok(PartyData {
            data: Matrix::hcat(&parts.iter().map(|p| &p.data).collect::<Vec<_>>())?,
            head: OutputHead::new(blocks, first.head.temperature)?,
        })
    }
}

/// Per-party views of an encoded table.
pub fn party_data(
    ds: &EncodedDataset,
    split: &VerticalSplit,
    temperature: f64,
) -> Result<Vec<PartyData>> {
    let blocks = vertical_split(ds, split)?;
    blocks
        .into_iter()
        .zip(&split.parties)
        .map(|(data, attrs)| {
            Ok(PartyData {
                data,
                head: OutputHead::new(ds.encoder.head_blocks(attrs), temperature)?,
            })
        })
        .collect()
}

/// A training protocol stepped by [`train`].
pub trait Protocol {
    fn discriminator_step(&mut self) -> Result<DiscReport>;
    /// One generator update; returns the generator loss.
    fn generator_step(&mut self) -> Result<f64>;
    fn generators(&self) -> Generators;
    /// Each party's critic up to and including its intermediate feature layer.
    fn feature_extractors(&self) -> Vec<Mlp>;
    fn set_epoch(&mut self, epoch: usize);
}

/// Instantiates the protocol for `variant`.
pub fn build(
    variant: Variant,
    parts: &[PartyData],
    cfg: &GanConfig,
    dp: Option<&DpConfig>,
    rng: &RngStream,
) -> Result<Box<dyn Protocol + Send>> {
    check_inputs(parts, cfg, dp)?;
    Ok(match variant {
        Variant::Vflgan | Variant::VflganBase => {
            Box::new(VflSystem::new(variant, parts, cfg, dp, rng)?)
        }
        Variant::Vertigan | Variant::Central => {
            Box::new(LocalSystem::new(variant, parts, cfg, dp, rng)?)
        }
    })
}

fn check_inputs(parts: &[PartyData], cfg: &GanConfig, dp: Option<&DpConfig>) -> Result<usize> {
    let n = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("no parties".into()))?
        .data
        .rows();
    if let Some(i) = parts.iter().position(|p| p.data.rows() != n) {
        return Err(Error::InvalidArgument(format!(
            "party {i} holds {} rows, party 0 holds {n}",
            parts[i].data.rows()
        )));
    }
    if let Some(i) = parts.iter().position(|p| p.data.cols() == 0) {
        return Err(Error::InvalidArgument(format!(
            "party {i} holds no columns"
        )));
    }
    cfg.validate(n)?;
    if let Some(dp) = dp {
        dp.validate()?;
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub fd: f64,
    /// Mean party critic losses over the epoch's critic iterations.
    pub loss_d: Vec<Option<f64>>,
    pub loss_ds: Option<f64>,
    pub loss_g: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record with the lowest FD; the earliest wins ties.
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.fd <= r.fd => Some(b),
                _ => Some(r),
            })
    }

    /// CSV with columns `epoch, fd, loss_d1..loss_dM, loss_ds, loss_g`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let parties = self.records.first().map_or(0, |r| r.loss_d.len());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["epoch".to_string(), "fd".to_string()];
        header.extend((1..=parties).map(|i| format!("loss_d{i}")));
        header.push("loss_ds".into());
        header.push("loss_g".into());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.epoch.to_string(), r.fd.to_string()];
            row.extend(r.loss_d.iter().map(|&v| opt(v)));
            row.push(opt(r.loss_ds));
            row.push(r.loss_g.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Generators after the last epoch.
    pub generators: Generators,
    /// Generators at the lowest logged FD (the initial ones when no epoch ran).
    pub best: Generators,
    pub best_epoch: Option<usize>,
    pub log: TrainLog,
    /// Party feature extractors after the last epoch.
    pub feature_extractors: Vec<Mlp>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Runs `cfg.epochs` epochs of `cfg.disc_steps` critic iterations followed by
/// one generator update, logging the FD of a fresh synthetic sample after
/// every epoch.
pub fn train(
    variant: Variant,
    parts: &[PartyData],
    cfg: &GanConfig,
    dp: Option<&DpConfig>,
    rng: &RngStream,
) -> Result<TrainOutput> {
    let n = check_inputs(parts, cfg, dp)?;
    let mut system = build(variant, parts, cfg, dp, rng)?;
    let real = PartyData::concat(parts)?.data;
    let real_stats = dataset_stats(&real)?;
    let fd_rows = n.min(cfg.fd_sample).max(2);

    let initial = system.generators();
    let mut best = initial.clone();
    let mut best_fd = f64::INFINITY;
    let mut best_epoch = None;
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        system.set_epoch(epoch);
        let mut reports = Vec::with_capacity(cfg.disc_steps);
        for _ in 0..cfg.disc_steps {
            reports.push(system.discriminator_step()?);
        }
        let loss_g = system.generator_step()?;
        let gens = system.generators();
        let synth = generate(&gens, fd_rows, &rng.child("fd-log", 0, epoch as u64))?;
        if !synth.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                role: "generated sample".into(),
            });
        }
        let fd = frechet_distance(&real_stats, &dataset_stats(&synth)?)?;
        let parties = reports[0].party_losses.len();
        let loss_d = (0..parties)
            .map(|i| mean_of(reports.iter().map(|r| r.party_losses[i])))
            .collect();
        let loss_ds = mean_of(reports.iter().map(|r| r.server_loss));
        if fd < best_fd {
            best_fd = fd;
            best = gens;
            best_epoch = Some(epoch);
        }
        log.records.push(EpochRecord {
            epoch,
            fd,
            loss_d,
            loss_ds,
            loss_g,
        });
    }
    Ok(TrainOutput {
        generators: system.generators(),
        feature_extractors: system.feature_extractors(),
        best,
        best_epoch,
        log,
    })
}
