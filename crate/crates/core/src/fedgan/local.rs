//! Per-party WGAN-GP with a generator backbone kept identical across parties
//! by summing its gradients. With one party holding every column this is
//! the centralized reference.

use super::common::*;
use super::config::{GanConfig, Variant};
use super::generate::{Generators, PartyGenerator};
use super::messages::ProtocolMessage;
use super::train::{PartyData, Protocol};
use crate::data::subsample_batch;
use crate::dp::DpConfig;
use crate::error::{Error, Result};
use crate::nn::{
    draw_betas, gradient_penalty, interpolate_with, Activation, AdamState, GradSet, Matrix, Mlp,
    OutputHead,
};
use crate::rng::RngStream;

pub struct LocalParty {
    pub index: usize,
    data: Matrix,
    pub head: OutputHead,
    /// Shared-shape generator trunk.
    pub backbone: Mlp,
    pub backbone_opt: AdamState,
    /// Private generator output layer.
    pub gen_head: Mlp,
    pub head_opt: AdamState,
    pub critic: Mlp,
    pub critic_opt: AdamState,
    streams: PartyStreams,
}

impl LocalParty {
    pub fn new(index: usize, part: &PartyData, cfg: &GanConfig, rng: &RngStream) -> Result<Self> {
        let width = part.data.cols();
        if part.head.width() != width {
            return Err(Error::InvalidArgument(format!(
                "party {index}: output head covers {} columns, data has {width}",
                part.head.width()
            )));
        }
        let i = index as u64;
        let mut trunk = vec![cfg.latent_dim];
        trunk.extend_from_slice(&cfg.gen_hidden);
        // Every party starts from the same backbone.
        let backbone = Mlp::init(
            &trunk,
            Activation::Relu,
            Activation::Relu,
            &mut rng.child("init", 0, 3),
        )?;
        let gen_head = Mlp::init(
            &[backbone.output_width(), width],
            Activation::Identity,
            Activation::Identity,
            &mut rng.child("init", i, 0),
        )?;
        let mut critic_widths = widths(width, &cfg.disc_hidden, cfg.feature_width);
        critic_widths.extend_from_slice(&cfg.disc2_hidden);
        critic_widths.push(1);
        let critic = Mlp::init(
            &critic_widths,
            Activation::leaky(),
            Activation::Identity,
            &mut rng.child("init", i, 1),
        )?;
        Ok(Self {
            index,
            data: part.data.clone(),
            head: part.head.clone(),
            backbone_opt: AdamState::new(&backbone),
            backbone,
            head_opt: AdamState::new(&gen_head),
            gen_head,
            critic_opt: AdamState::new(&critic),
            critic,
            streams: PartyStreams::new(rng, index),
        })
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    fn synthesize(&mut self, z: &Matrix) -> Result<Matrix> {
        let raw = self.gen_head.predict(&self.backbone.predict(z)?)?;
        self.head.forward(&raw, Some(&mut self.streams.gumbel))
    }

    /// One local WGAN-GP critic update on the party's own columns.
    pub fn disc_step(
        &mut self,
        cfg: &GanConfig,
        dp: Option<&DpConfig>,
        epoch: usize,
        privatized: &mut Vec<PrivatizedSlice>,
    ) -> Result<f64> {
        let b = cfg.batch_size;
        let idx = subsample_batch(self.data.rows(), b, &mut self.streams.shared)?;
        let z = self.streams.shared.normal_matrix(b, cfg.latent_dim);
        let x_real = self.data.select_rows(&idx);
        let x_fake = self.synthesize(&z)?;
        let (out_r, tape_r) = self.critic.forward(&x_real)?;
        let (out_f, tape_f) = self.critic.forward(&x_fake)?;
        let betas = draw_betas(b, &mut self.streams.interp);
        let x_hat = interpolate_with(&x_real, &x_fake, &betas)?;
        let gp = gradient_penalty(&self.critic, &x_hat, cfg.lambda_gp)?;
        let loss = -mean_score(&out_r) + mean_score(&out_f) + gp.penalty;
        let role = format!("D{}", self.index + 1);
        ensure_finite(loss, epoch, role.as_str())?;

        let (mut grads, _) = self.critic.backward(&tape_r, &score_grad(b, -1.0))?;
        grads.add_assign(&self.critic.backward(&tape_f, &score_grad(b, 1.0))?.0)?;
        grads.add_assign(&gp.grads)?;
        ensure_finite_grads(&grads, epoch, role)?;
        if let Some(dp) = dp {
            privatize_first_layer(&mut grads, dp, &mut self.streams.noise);
            privatized.push(PrivatizedSlice {
                party: self.index,
                network: "critic",
                layer: 0,
            });
        }
        update(&mut self.critic, &grads, &mut self.critic_opt, cfg.lr_d)?;
        Ok(loss)
    }

    /// Generator gradients for `−E[D(G(z))]`: returns the backbone gradient
    /// message, the private head gradients and the loss.
    pub fn gen_grads(
        &mut self,
        cfg: &GanConfig,
        epoch: usize,
    ) -> Result<(ProtocolMessage, GradSet, f64)> {
        let b = cfg.batch_size;
        let z = self.streams.shared.normal_matrix(b, cfg.latent_dim);
        let (hidden, tape_b) = self.backbone.forward(&z)?;
        let (raw, tape_h) = self.gen_head.forward(&hidden)?;
        let x_fake = self.head.forward(&raw, Some(&mut self.streams.gumbel))?;
        let (out, tape_c) = self.critic.forward(&x_fake)?;
        let loss = -mean_score(&out);
        ensure_finite(loss, epoch, format!("G{}", self.index + 1))?;
        let dx = self.critic.input_grad(&tape_c, &score_grad(b, -1.0))?;
        let draw = self.head.backward(&x_fake, &dx)?;
        let (gh, d_hidden) = self.gen_head.backward(&tape_h, &draw)?;
        let (gb, _) = self.backbone.backward(&tape_b, &d_hidden)?;
        ensure_finite_grads(&gb, epoch, format!("G{}", self.index + 1))?;
        ensure_finite_grads(&gh, epoch, format!("G{}", self.index + 1))?;
        let msg = ProtocolMessage::BackboneGradUp {
            party: self.index,
            grads: gb,
        };
        Ok((msg, gh, loss))
    }

    pub fn apply_gen(
        &mut self,
        down: &ProtocolMessage,
        head_grads: &GradSet,
        cfg: &GanConfig,
    ) -> Result<()> {
        let ProtocolMessage::BackboneGradDown { grads } = down else {
            return Err(Error::Protocol(format!(
                "party {} expected BackboneGradDown, got {}",
                self.index,
                down.kind()
            )));
        };
        update(&mut self.backbone, grads, &mut self.backbone_opt, cfg.lr_g)?;
        update(&mut self.gen_head, head_grads, &mut self.head_opt, cfg.lr_g)
    }

    pub fn generator(&self) -> Result<PartyGenerator> {
        Ok(PartyGenerator {
            mlp: self.backbone.chain(&self.gen_head)?,
            head: self.head.clone(),
        })
    }
}

/// Sums backbone gradients in party order.
pub fn aggregate_backbone(ups: &[ProtocolMessage]) -> Result<ProtocolMessage> {
    let mut total: Option<GradSet> = None;
    for (i, msg) in ups.iter().enumerate() {
        let ProtocolMessage::BackboneGradUp { party, grads } = msg else {
            return Err(Error::Protocol(format!(
                "server expected BackboneGradUp, got {}",
                msg.kind()
            )));
        };
        if *party != i {
            return Err(Error::Protocol(format!(
                "backbone gradient from party {party} arrived in slot {i}"
            )));
        }
        match total.as_mut() {
            None => total = Some(grads.clone()),
            Some(t) => t
                .add_assign(grads)
                .map_err(|e| Error::Protocol(e.to_string()))?,
        }
    }
    let grads = total.ok_or_else(|| Error::Protocol("no backbone gradients".into()))?;
    Ok(ProtocolMessage::BackboneGradDown { grads })
}

pub struct LocalSystem {
    pub variant: Variant,
    pub cfg: GanConfig,
    pub dp: Option<DpConfig>,
    pub parties: Vec<LocalParty>,
    pub epoch: usize,
}

impl LocalSystem {
    /// VertiGAN over the given parties, or the centralized reference when
    /// `variant` is [`Variant::Central`] (parties are concatenated).
    pub fn new(
        variant: Variant,
        parts: &[PartyData],
        cfg: &GanConfig,
        dp: Option<&DpConfig>,
        rng: &RngStream,
    ) -> Result<Self> {
        let parties = match variant {
            Variant::Vertigan => {
                if dp.is_some() {
                    return Err(Error::InvalidArgument(
                        "the first-layer mechanism is not defined for VERTIGAN".into(),
                    ));
                }
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| LocalParty::new(i, p, cfg, rng))
                    .collect::<Result<Vec<_>>>()?
            }
            Variant::Central => vec![LocalParty::new(0, &PartyData::concat(parts)?, cfg, rng)?],
            v => {
                return Err(Error::InvalidArgument(format!(
                    "{} is not a local variant",
                    v.name()
                )))
            }
        };
        Ok(Self {
            variant,
            cfg: cfg.clone(),
            dp: dp.copied(),
            parties,
            epoch: 0,
        })
    }

    fn check_backbones(&self) -> Result<()> {
        let first = &self.parties[0].backbone;
        for p in &self.parties[1..] {
            if p.backbone != *first {
                return Err(Error::Protocol(format!(
                    "backbone of party {} diverged from party 0",
                    p.index
                )));
            }
        }
        Ok(())
    }
}

impl Protocol for LocalSystem {
    fn discriminator_step(&mut self) -> Result<DiscReport> {
        let mut report = DiscReport::default();
        for p in &mut self.parties {
            let loss = p.disc_step(
                &self.cfg,
                self.dp.as_ref(),
                self.epoch,
                &mut report.privatized,
            )?;
            report.party_losses.push(Some(loss));
        }
        Ok(report)
    }

    fn generator_step(&mut self) -> Result<f64> {
        let mut ups = Vec::with_capacity(self.parties.len());
        let mut heads = Vec::with_capacity(self.parties.len());
        let mut loss = 0.0;
        for p in &mut self.parties {
            let (up, gh, l) = p.gen_grads(&self.cfg, self.epoch)?;
            ups.push(up);
            heads.push(gh);
            loss += l;
        }
        let down = aggregate_backbone(&ups)?;
        for (p, gh) in self.parties.iter_mut().zip(&heads) {
            p.apply_gen(&down, gh, &self.cfg)?;
        }
        self.check_backbones()?;
        Ok(loss)
    }

    fn generators(&self) -> Generators {
        Generators {
            latent_dim: self.cfg.latent_dim,
            parties: self
                .parties
                .iter()
                .map(|p| p.generator().expect("backbone and head widths chain"))
                .collect(),
        }
    }

    fn feature_extractors(&self) -> Vec<Mlp> {
        let depth = self.cfg.disc_hidden.len() + 1;
        self.parties
            .iter()
            .map(|p| Mlp::new(p.critic.layers()[..depth].to_vec()).expect("non-empty prefix"))
            .collect()
    }

    fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }
}
