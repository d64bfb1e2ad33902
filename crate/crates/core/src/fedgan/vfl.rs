//! Vertical protocol: party critics split at the intermediate feature, and
//! a server critic on the concatenated features.

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
    OutputHead, Tape,
};
use crate::rng::RngStream;

struct DiscPending {
    x_real: Matrix,
    x_fake: Matrix,
    f_real: Matrix,
    f_fake: Matrix,
    tape_real: Tape,
    tape_fake: Tape,
}

struct GenPending {
    gen_tape: Tape,
    x_fake: Matrix,
    feature: Matrix,
    d1_tape: Tape,
}

/// One data holder: its private columns, generator and critic parts.
pub struct VflParty {
    pub index: usize,
    data: Matrix,
    pub head: OutputHead,
    pub generator: Mlp,
    pub g_opt: AdamState,
    /// First critic part, ending at the intermediate feature.
    pub d1: Mlp,
    pub d1_opt: AdamState,
    /// Second critic part; absent in the base variant.
    pub d2: Option<Mlp>,
    pub d2_opt: Option<AdamState>,
    streams: PartyStreams,
    disc_pending: Option<DiscPending>,
    gen_pending: Option<GenPending>,
}

fn expect_down(
    msg: ProtocolMessage,
    party: usize,
    need_real: bool,
) -> Result<(Option<Matrix>, Matrix)> {
    match msg {
        ProtocolMessage::FeatureGradDown {
            party: p,
            real,
            synthetic,
        } if p == party && real.is_some() == need_real => Ok((real, synthetic)),
        other => Err(Error::Protocol(format!(
            "party {party} expected FeatureGradDown, got {} for {:?}",
            other.kind(),
            other.party()
        ))),
    }
}

impl VflParty {
    pub fn new(
        index: usize,
        part: &PartyData,
        variant: Variant,
        cfg: &GanConfig,
        rng: &RngStream,
    ) -> Result<Self> {
        let width = part.data.cols();
        if part.head.width() != width {
            return Err(Error::InvalidArgument(format!(
                "party {index}: output head covers {} columns, data has {width}",
                part.head.width()
            )));
        }
        let i = index as u64;
        let generator = Mlp::init(
            &widths(cfg.latent_dim, &cfg.gen_hidden, width),
            Activation::Relu,
            Activation::Identity,
            &mut rng.child("init", i, 0),
        )?;
        let d1 = Mlp::init(
            &widths(width, &cfg.disc_hidden, cfg.feature_width),
            Activation::leaky(),
            Activation::leaky(),
            &mut rng.child("init", i, 1),
        )?;
        let d2 = match variant {
            Variant::Vflgan => Some(Mlp::init(
                &widths(cfg.feature_width, &cfg.disc2_hidden, 1),
                Activation::leaky(),
                Activation::Identity,
                &mut rng.child("init", i, 2),
            )?),
            _ => None,
        };
        Ok(Self {
            index,
            data: part.data.clone(),
            head: part.head.clone(),
            g_opt: AdamState::new(&generator),
            generator,
            d1_opt: AdamState::new(&d1),
            d1,
            d2_opt: d2.as_ref().map(AdamState::new),
            d2,
            streams: PartyStreams::new(rng, index),
            disc_pending: None,
            gen_pending: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    /// Draws the aligned batch and latent codes, runs the first critic part
    /// on real and synthetic rows and sends both features to the server.
    pub fn disc_features(&mut self, cfg: &GanConfig) -> Result<ProtocolMessage> {
        let idx = subsample_batch(self.data.rows(), cfg.batch_size, &mut self.streams.shared)?;
        let z = self
            .streams
            .shared
            .normal_matrix(cfg.batch_size, cfg.latent_dim);
        let x_real = self.data.select_rows(&idx);
        let raw = self.generator.predict(&z)?;
        let x_fake = self.head.forward(&raw, Some(&mut self.streams.gumbel))?;
        let (f_real, tape_real) = self.d1.forward(&x_real)?;
        let (f_fake, tape_fake) = self.d1.forward(&x_fake)?;
        let msg = ProtocolMessage::FeatureUp {
            party: self.index,
            real: Some(f_real.clone()),
            synthetic: f_fake.clone(),
        };
        self.disc_pending = Some(DiscPending {
            x_real,
            x_fake,
            f_real,
            f_fake,
            tape_real,
            tape_fake,
        });
        Ok(msg)
    }

    /// Combines the server's feature gradients with the local critic loss
    /// and updates both critic parts. Returns the local loss, if any.
    pub fn disc_update(
        &mut self,
        down: ProtocolMessage,
        cfg: &GanConfig,
        dp: Option<&DpConfig>,
        epoch: usize,
        privatized: &mut Vec<PrivatizedSlice>,
    ) -> Result<Option<f64>> {
        let (g_real, g_fake) = expect_down(down, self.index, true)?;
        let mut df_real = g_real.expect("checked by expect_down");
        let mut df_fake = g_fake;
        let p = self.disc_pending.take().ok_or_else(|| {
            Error::Protocol(format!("party {} has no pending critic step", self.index))
        })?;
        df_real.check_same_shape(&p.f_real, "FeatureGradDown real")?;
        df_fake.check_same_shape(&p.f_fake, "FeatureGradDown synthetic")?;
        let b = p.x_real.rows();

        let mut loss = None;
        let mut gp_first = None;
        let mut d2_grads = None;
        if let Some(d2) = &self.d2 {
            let (out_r, t2r) = d2.forward(&p.f_real)?;
            let (out_f, t2f) = d2.forward(&p.f_fake)?;
            let betas = draw_betas(b, &mut self.streams.interp);
            let x_hat = interpolate_with(&p.x_real, &p.x_fake, &betas)?;
            let gp = gradient_penalty(&self.d1.chain(d2)?, &x_hat, cfg.lambda_gp)?;
            let l = -mean_score(&out_r) + mean_score(&out_f) + gp.penalty;
            ensure_finite(l, epoch, format!("D{}", self.index + 1))?;
            loss = Some(l);

            let (mut g2, dfr) = d2.backward(&t2r, &score_grad(b, -1.0))?;
            let (g2f, dff) = d2.backward(&t2f, &score_grad(b, 1.0))?;
            g2.add_assign(&g2f)?;
            let (gp1, gp2) = gp.grads.split_at(self.d1.layers().len());
            g2.add_assign(&gp2)?;
            df_real.add_assign(&dfr)?;
            df_fake.add_assign(&dff)?;
            gp_first = Some(gp1);
            d2_grads = Some(g2);
        }

        let (mut g1, _) = self.d1.backward(&p.tape_real, &df_real)?;
        let (g1f, _) = self.d1.backward(&p.tape_fake, &df_fake)?;
        g1.add_assign(&g1f)?;
        if let Some(gp1) = gp_first {
            g1.add_assign(&gp1)?;
        }
        ensure_finite_grads(&g1, epoch, format!("D{}", self.index + 1))?;
        if let Some(dp) = dp {
            privatize_first_layer(&mut g1, dp, &mut self.streams.noise);
            privatized.push(PrivatizedSlice {
                party: self.index,
                network: "d1",
                layer: 0,
            });
        }
        update(&mut self.d1, &g1, &mut self.d1_opt, cfg.lr_d)?;
        if let (Some(d2), Some(opt), Some(g2)) = (self.d2.as_mut(), self.d2_opt.as_mut(), d2_grads)
        {
            update(d2, &g2, opt, cfg.lr_d)?;
        }
        Ok(loss)
    }

    /// Generates a synthetic batch from fresh shared latents and sends its
    /// features to the server.
    pub fn gen_features(&mut self, cfg: &GanConfig) -> Result<ProtocolMessage> {
        let z = self
            .streams
            .shared
            .normal_matrix(cfg.batch_size, cfg.latent_dim);
        let (raw, gen_tape) = self.generator.forward(&z)?;
        let x_fake = self.head.forward(&raw, Some(&mut self.streams.gumbel))?;
        let (feature, d1_tape) = self.d1.forward(&x_fake)?;
        let msg = ProtocolMessage::FeatureUp {
            party: self.index,
            real: None,
            synthetic: feature.clone(),
        };
        self.gen_pending = Some(GenPending {
            gen_tape,
            x_fake,
            feature,
            d1_tape,
        });
        Ok(msg)
    }

    /// Back-propagates the local and server scores into the generator and
    /// updates it. Returns the local score term of the generator loss.
    pub fn gen_update(
        &mut self,
        down: ProtocolMessage,
        cfg: &GanConfig,
        epoch: usize,
    ) -> Result<f64> {
        let (loss, grads) = self.gen_gradients(down, epoch)?;
        update(&mut self.generator, &grads, &mut self.g_opt, cfg.lr_g)?;
        Ok(loss)
    }

    /// Generator gradients of the full loss, without updating.
    pub fn gen_gradients(&mut self, down: ProtocolMessage, epoch: usize) -> Result<(f64, GradSet)> {
        let (_, mut df) = expect_down(down, self.index, false)?;
        let p = self.gen_pending.take().ok_or_else(|| {
            Error::Protocol(format!(
                "party {} has no pending generator step",
                self.index
            ))
        })?;
        df.check_same_shape(&p.feature, "FeatureGradDown synthetic")?;
        let b = p.x_fake.rows();
        let mut loss = 0.0;
        if let Some(d2) = &self.d2 {
            let (out, t2) = d2.forward(&p.feature)?;
            loss = -mean_score(&out);
            df.add_assign(&d2.input_grad(&t2, &score_grad(b, -1.0))?)?;
        }
        let dx = self.d1.input_grad(&p.d1_tape, &df)?;
        let draw = self.head.backward(&p.x_fake, &dx)?;
        let (gg, _) = self.generator.backward(&p.gen_tape, &draw)?;
        ensure_finite_grads(&gg, epoch, format!("G{}", self.index + 1))?;
        Ok((loss, gg))
    }

    pub fn generator(&self) -> PartyGenerator {
        PartyGenerator {
            mlp: self.generator.clone(),
            head: self.head.clone(),
        }
    }
}

/// The server: the shared critic over concatenated intermediate features.
pub struct Server {
    pub critic: Mlp,
    pub opt: AdamState,
    parties: usize,
    feature_width: usize,
    interp: RngStream,
}

impl Server {
    pub fn new(parties: usize, cfg: &GanConfig, rng: &RngStream) -> Result<Self> {
        let critic = Mlp::init(
            &widths(parties * cfg.feature_width, &cfg.server_hidden, 1),
            Activation::leaky(),
            Activation::Identity,
            &mut rng.child("init", parties as u64, 0),
        )?;
        Ok(Self {
            opt: AdamState::new(&critic),
            critic,
            parties,
            feature_width: cfg.feature_width,
            interp: rng.child("server-interp", 0, 0),
        })
    }

    fn collect(
        &self,
        ups: Vec<ProtocolMessage>,
        need_real: bool,
    ) -> Result<(Option<Matrix>, Matrix)> {
        if ups.len() != self.parties {
            return Err(Error::Protocol(format!(
                "server expected {} feature messages, got {}",
                self.parties,
                ups.len()
            )));
        }
        let mut reals = Vec::with_capacity(self.parties);
        let mut synths = Vec::with_capacity(self.parties);
        for (i, msg) in ups.into_iter().enumerate() {
            match msg {
                ProtocolMessage::FeatureUp {
                    party,
                    real,
                    synthetic,
                } if party == i && real.is_some() == need_real => {
                    for m in real.iter().chain(std::iter::once(&synthetic)) {
                        if m.cols() != self.feature_width {
                            return Err(Error::Protocol(format!(
                                "party {party} sent {} feature columns, expected {}",
                                m.cols(),
                                self.feature_width
                            )));
                        }
                    }
                    reals.extend(real);
                    synths.push(synthetic);
                }
                other => {
                    return Err(Error::Protocol(format!(
                        "server expected FeatureUp from party {i}, got {} from {:?}",
                        other.kind(),
                        other.party()
                    )))
                }
            }
        }
        let real = if need_real {
            Some(
                Matrix::hcat(&reals.iter().collect::<Vec<_>>())
                    .map_err(|e| Error::Protocol(e.to_string()))?,
            )
        } else {
            None
        };
        let synth = Matrix::hcat(&synths.iter().collect::<Vec<_>>())
            .map_err(|e| Error::Protocol(e.to_string()))?;
        Ok((real, synth))
    }

    fn split(&self, m: &Matrix) -> Vec<Matrix> {
        (0..self.parties)
            .map(|i| m.col_range(i * self.feature_width..(i + 1) * self.feature_width))
            .collect()
    }

    /// Scores real and synthetic features, updates the shared critic and
    /// returns `λ1 · ∂L_s/∂f_i` to every party together with `L_s`.
    pub fn disc_round(
        &mut self,
        ups: Vec<ProtocolMessage>,
        cfg: &GanConfig,
        epoch: usize,
    ) -> Result<(Vec<ProtocolMessage>, f64)> {
        let (real, synth) = self.collect(ups, true)?;
        let real = real.expect("collected with real features");
        if real.rows() != synth.rows() {
            return Err(Error::Protocol(
                "real and synthetic batches differ in size".into(),
            ));
        }
        let b = real.rows();
        let (out_r, tape_r) = self.critic.forward(&real)?;
        let (out_f, tape_f) = self.critic.forward(&synth)?;
        let betas = draw_betas(b, &mut self.interp);
        let f_hat = interpolate_with(&real, &synth, &betas)?;
        let gp = gradient_penalty(&self.critic, &f_hat, cfg.lambda_gp)?;
        let loss = -mean_score(&out_r) + mean_score(&out_f) + gp.penalty;
        ensure_finite(loss, epoch, "D_s")?;

        let (mut grads, mut d_real) = self.critic.backward(&tape_r, &score_grad(b, -1.0))?;
        let (gf, mut d_synth) = self.critic.backward(&tape_f, &score_grad(b, 1.0))?;
        grads.add_assign(&gf)?;
        grads.add_assign(&gp.grads)?;
        let one_minus: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        d_real.add_assign(&gp.input_grad.scale_rows(&betas))?;
        d_synth.add_assign(&gp.input_grad.scale_rows(&one_minus))?;
        d_real.scale(cfg.lambda1);
        d_synth.scale(cfg.lambda1);
        ensure_finite_grads(&grads, epoch, "D_s")?;
        update(&mut self.critic, &grads, &mut self.opt, cfg.lr_ds)?;

        let downs = self
            .split(&d_real)
            .into_iter()
            .zip(self.split(&d_synth))
            .enumerate()
            .map(|(party, (r, s))| ProtocolMessage::FeatureGradDown {
                party,
                real: Some(r),
                synthetic: s,
            })
            .collect();
        Ok((downs, loss))
    }

    /// Scores synthetic features for the generator step. Returns
    /// `∂(−λ2 · E[D_s])/∂f̃_i` per party and the term `−λ2 · E[D_s]`.
    pub fn gen_round(
        &mut self,
        ups: Vec<ProtocolMessage>,
        cfg: &GanConfig,
    ) -> Result<(Vec<ProtocolMessage>, f64)> {
        let (_, synth) = self.collect(ups, false)?;
        let b = synth.rows();
        let (out, tape) = self.critic.forward(&synth)?;
        let term = -cfg.lambda2 * mean_score(&out);
        let d = self
            .critic
            .input_grad(&tape, &score_grad(b, -cfg.lambda2))?;
        let downs = self
            .split(&d)
            .into_iter()
            .enumerate()
            .map(|(party, s)| ProtocolMessage::FeatureGradDown {
                party,
                real: None,
                synthetic: s,
            })
            .collect();
        Ok((downs, term))
    }
}

/// Parties plus server, stepped in lock-step with synchronous delivery.
pub struct VflSystem {
    pub variant: Variant,
    pub cfg: GanConfig,
    pub dp: Option<DpConfig>,
    pub parties: Vec<VflParty>,
    pub server: Server,
    pub epoch: usize,
    latent_dim: usize,
}

impl VflSystem {
    pub fn new(
        variant: Variant,
        parts: &[PartyData],
        cfg: &GanConfig,
        dp: Option<&DpConfig>,
        rng: &RngStream,
    ) -> Result<Self> {
        if !variant.is_vertical() {
            return Err(Error::InvalidArgument(format!(
                "{} is not a vertical variant",
                variant.name()
            )));
        }
        let parties = parts
            .iter()
            .enumerate()
            .map(|(i, p)| VflParty::new(i, p, variant, cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant,
            cfg: cfg.clone(),
            dp: dp.copied(),
            server: Server::new(parts.len(), cfg, rng)?,
            parties,
            epoch: 0,
            latent_dim: cfg.latent_dim,
        })
    }
}

impl Protocol for VflSystem {
    fn discriminator_step(&mut self) -> Result<DiscReport> {
        let ups = self
            .parties
            .iter_mut()
            .map(|p| p.disc_features(&self.cfg))
            .collect::<Result<Vec<_>>>()?;
        let (downs, server_loss) = self.server.disc_round(ups, &self.cfg, self.epoch)?;
        let mut report = DiscReport {
            server_loss: Some(server_loss),
            ..DiscReport::default()
        };
        for (p, down) in self.parties.iter_mut().zip(downs) {
            let loss = p.disc_update(
                down,
                &self.cfg,
                self.dp.as_ref(),
                self.epoch,
                &mut report.privatized,
            )?;
            report.party_losses.push(loss);
        }
        Ok(report)
    }

    fn generator_step(&mut self) -> Result<f64> {
        let ups = self
            .parties
            .iter_mut()
            .map(|p| p.gen_features(&self.cfg))
            .collect::<Result<Vec<_>>>()?;
        let (downs, server_term) = self.server.gen_round(ups, &self.cfg)?;
        let mut loss = server_term;
        for (p, down) in self.parties.iter_mut().zip(downs) {
            loss += p.gen_update(down, &self.cfg, self.epoch)?;
        }
        ensure_finite(loss, self.epoch, "G")?;
        Ok(loss)
    }

    fn generators(&self) -> Generators {
        Generators {
            latent_dim: self.latent_dim,
            parties: self.parties.iter().map(VflParty::generator).collect(),
        }
    }

    fn feature_extractors(&self) -> Vec<Mlp> {
        self.parties.iter().map(|p| p.d1.clone()).collect()
    }

    fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }
}
