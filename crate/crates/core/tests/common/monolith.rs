//! Message-free re-computation of one VFLGAN epoch, used as the oracle for
//! the party/server protocol.

use vflgan_core::data::subsample_batch;
use vflgan_core::dp::{clip_gradients, noise_gradients, DpConfig};
use vflgan_core::fedgan::{DiscReport, GanConfig, PartyData, Protocol, VflSystem};
use vflgan_core::nn::{
    adam_step, draw_betas, gradient_penalty, interpolate_with, AdamConfig, AdamState, GradSet,
    HeadBlock, Matrix, Mlp, OutputHead,
};
use vflgan_core::RngStream;

pub fn toy_parts(n: usize, seed: u64) -> Vec<PartyData> {
    let mut rng = RngStream::from_seed(seed);
    let a = rng.normal_matrix(n, 2);
    let mut b = Matrix::zeros(n, 4);
    for r in 0..n {
        b.row_mut(r)[0] = rng.normal();
        b.row_mut(r)[1 + (rng.uniform() * 3.0) as usize] = 1.0;
    }
    vec![
        PartyData {
            data: a,
            head: OutputHead::new(vec![HeadBlock::Identity { width: 2 }], 0.2).unwrap(),
        },
        PartyData {
            data: b,
            head: OutputHead::new(
                vec![
                    HeadBlock::Identity { width: 1 },
                    HeadBlock::Softmax { width: 3 },
                ],
                0.2,
            )
            .unwrap(),
        },
    ]
}

pub fn toy_cfg(batch: usize, disc_steps: usize) -> GanConfig {
    GanConfig {
        latent_dim: 4,
        gen_hidden: vec![8],
        disc_hidden: vec![6],
        feature_width: 3,
        disc2_hidden: vec![4],
        server_hidden: vec![5],
        lambda1: 0.7,
        lambda2: 1.3,
        lr_g: 1e-3,
        lr_d: 2e-3,
        lr_ds: 3e-3,
        batch_size: batch,
        disc_steps,
        epochs: 1,
        fd_sample: 64,
        ..GanConfig::default()
    }
}

pub fn toy_dp(rate: f64) -> DpConfig {
    DpConfig {
        clip: 0.5,
        sigma: 0.8,
        target_epsilon: 10.0,
        delta: 1e-5,
        sampling_rate: rate,
        steps: 1,
    }
}

pub fn mlp_diff(a: &Mlp, b: &Mlp) -> f64 {
    a.flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn run_epoch(system: &mut dyn Protocol, cfg: &GanConfig) -> (Vec<DiscReport>, f64) {
    system.set_epoch(1);
    let reports = (0..cfg.disc_steps)
        .map(|_| system.discriminator_step().unwrap())
        .collect();
    (reports, system.generator_step().unwrap())
}

pub fn filled(rows: usize, v: f64) -> Matrix {
    Matrix::filled(rows, 1, v)
}

pub fn adam(mlp: &mut Mlp, g: &GradSet, st: &mut AdamState, lr: f64) {
    adam_step(mlp, g, st, &AdamConfig::with_lr(lr)).unwrap();
}

/// All networks of the vertical system held in one place, stepped by a
/// monolithic formulation: each party's critic objective is taken over the
/// chained network `d1 ∘ d2` and the server's feature gradients are pulled
/// back through `d1` directly.
pub struct Monolith {
    pub g: Vec<Mlp>,
    pub d1: Vec<Mlp>,
    pub d2: Vec<Option<Mlp>>,
    pub ds: Mlp,
}

impl Monolith {
    pub fn from_system(s: &VflSystem) -> Self {
        Self {
            g: s.parties.iter().map(|p| p.generator.clone()).collect(),
            d1: s.parties.iter().map(|p| p.d1.clone()).collect(),
            d2: s.parties.iter().map(|p| p.d2.clone()).collect(),
            ds: s.server.critic.clone(),
        }
    }

    pub fn epoch(
        &mut self,
        parts: &[PartyData],
        cfg: &GanConfig,
        dp: Option<&DpConfig>,
        rng: &RngStream,
    ) {
        let k = parts.len();
        let b = cfg.batch_size;
        let n = parts[0].data.rows();
        let fw = cfg.feature_width;
        let inv = 1.0 / b as f64;
        let mut shared = rng.child("shared", 0, 0);
        let mut gumbel: Vec<_> = (0..k).map(|i| rng.child("gumbel", i as u64, 0)).collect();
        let mut interp: Vec<_> = (0..k).map(|i| rng.child("interp", i as u64, 0)).collect();
        let mut noise: Vec<_> = (0..k).map(|i| rng.child("dp-noise", i as u64, 0)).collect();
        let mut s_interp = rng.child("server-interp", 0, 0);
        let mut opt_g: Vec<_> = self.g.iter().map(AdamState::new).collect();
        let mut opt_d1: Vec<_> = self.d1.iter().map(AdamState::new).collect();
        let mut opt_d2: Vec<_> = self
            .d2
            .iter()
            .map(|d| d.as_ref().map(AdamState::new))
            .collect();
        let mut opt_ds = AdamState::new(&self.ds);

        for _ in 0..cfg.disc_steps {
            let idx = subsample_batch(n, b, &mut shared).unwrap();
            let z = shared.normal_matrix(b, cfg.latent_dim);
            let xr: Vec<Matrix> = parts.iter().map(|p| p.data.select_rows(&idx)).collect();
            let xf: Vec<Matrix> = (0..k)
                .map(|i| {
                    let raw = self.g[i].predict(&z).unwrap();
                    parts[i].head.forward(&raw, Some(&mut gumbel[i])).unwrap()
                })
                .collect();
            let fr: Vec<Matrix> = (0..k)
                .map(|i| self.d1[i].predict(&xr[i]).unwrap())
                .collect();
            let ff: Vec<Matrix> = (0..k)
                .map(|i| self.d1[i].predict(&xf[i]).unwrap())
                .collect();
            let big_r = Matrix::hcat(&fr.iter().collect::<Vec<_>>()).unwrap();
            let big_f = Matrix::hcat(&ff.iter().collect::<Vec<_>>()).unwrap();

            let beta_s = draw_betas(b, &mut s_interp);
            let gp = gradient_penalty(
                &self.ds,
                &interpolate_with(&big_r, &big_f, &beta_s).unwrap(),
                cfg.lambda_gp,
            )
            .unwrap();
            let (mut gs, mut d_r) = self
                .ds
                .backward(&self.ds.forward(&big_r).unwrap().1, &filled(b, -inv))
                .unwrap();
            let (gsf, mut d_f) = self
                .ds
                .backward(&self.ds.forward(&big_f).unwrap().1, &filled(b, inv))
                .unwrap();
            gs.add_assign(&gsf).unwrap();
            gs.add_assign(&gp.grads).unwrap();
            let one_minus: Vec<f64> = beta_s.iter().map(|v| 1.0 - v).collect();
            d_r.add_assign(&gp.input_grad.scale_rows(&beta_s)).unwrap();
            d_f.add_assign(&gp.input_grad.scale_rows(&one_minus))
                .unwrap();

            let mut party_grads = Vec::new();
            for i in 0..k {
                let d1 = &self.d1[i];
                let cols = i * fw..(i + 1) * fw;
                let mut g1 = d1
                    .backward(
                        &d1.forward(&xr[i]).unwrap().1,
                        &d_r.col_range(cols.clone()).scaled(cfg.lambda1),
                    )
                    .unwrap()
                    .0;
                let g1f = d1
                    .backward(
                        &d1.forward(&xf[i]).unwrap().1,
                        &d_f.col_range(cols).scaled(cfg.lambda1),
                    )
                    .unwrap()
                    .0;
                g1.add_assign(&g1f).unwrap();
                let mut g2 = None;
                if let Some(d2) = &self.d2[i] {
                    let c = d1.chain(d2).unwrap();
                    let beta = draw_betas(b, &mut interp[i]);
                    let cgp = gradient_penalty(
                        &c,
                        &interpolate_with(&xr[i], &xf[i], &beta).unwrap(),
                        cfg.lambda_gp,
                    )
                    .unwrap();
                    let mut gc = c
                        .backward(&c.forward(&xr[i]).unwrap().1, &filled(b, -inv))
                        .unwrap()
                        .0;
                    gc.add_assign(
                        &c.backward(&c.forward(&xf[i]).unwrap().1, &filled(b, inv))
                            .unwrap()
                            .0,
                    )
                    .unwrap();
                    gc.add_assign(&cgp.grads).unwrap();
                    let (a, rest) = gc.split_at(d1.layers().len());
                    g1.add_assign(&a).unwrap();
                    g2 = Some(rest);
                }
                if let Some(dp) = dp {
                    let clipped = clip_gradients(&g1.layers[0], dp.clip);
                    g1.layers[0] = noise_gradients(&clipped, dp.sigma, dp.clip, &mut noise[i]);
                }
                party_grads.push((g1, g2));
            }
            adam(&mut self.ds, &gs, &mut opt_ds, cfg.lr_ds);
            for (i, (g1, g2)) in party_grads.into_iter().enumerate() {
                adam(&mut self.d1[i], &g1, &mut opt_d1[i], cfg.lr_d);
                if let (Some(d2), Some(g2)) = (self.d2[i].as_mut(), g2) {
                    adam(d2, &g2, opt_d2[i].as_mut().unwrap(), cfg.lr_d);
                }
            }
        }

        let z = shared.normal_matrix(b, cfg.latent_dim);
        let mut tapes = Vec::new();
        let mut xs = Vec::new();
        for i in 0..k {
            let (raw, tape) = self.g[i].forward(&z).unwrap();
            xs.push(parts[i].head.forward(&raw, Some(&mut gumbel[i])).unwrap());
            tapes.push(tape);
        }
        let feats: Vec<Matrix> = (0..k)
            .map(|i| self.d1[i].predict(&xs[i]).unwrap())
            .collect();
        let big = Matrix::hcat(&feats.iter().collect::<Vec<_>>()).unwrap();
        let d_big = self
            .ds
            .input_grad(
                &self.ds.forward(&big).unwrap().1,
                &filled(b, -cfg.lambda2 * inv),
            )
            .unwrap();
        for i in 0..k {
            let d1 = &self.d1[i];
            let mut dx = d1
                .input_grad(
                    &d1.forward(&xs[i]).unwrap().1,
                    &d_big.col_range(i * fw..(i + 1) * fw),
                )
                .unwrap();
            if let Some(d2) = &self.d2[i] {
                let c = d1.chain(d2).unwrap();
                dx.add_assign(
                    &c.input_grad(&c.forward(&xs[i]).unwrap().1, &filled(b, -inv))
                        .unwrap(),
                )
                .unwrap();
            }
            let draw = parts[i].head.backward(&xs[i], &dx).unwrap();
            let gg = self.g[i].backward(&tapes[i], &draw).unwrap().0;
            adam(&mut self.g[i], &gg, &mut opt_g[i], cfg.lr_g);
        }
    }

    pub fn max_diff(&self, s: &VflSystem) -> f64 {
        let mut worst = mlp_diff(&self.ds, &s.server.critic);
        for (i, p) in s.parties.iter().enumerate() {
            worst = worst.max(mlp_diff(&self.g[i], &p.generator));
            worst = worst.max(mlp_diff(&self.d1[i], &p.d1));
            if let (Some(a), Some(b)) = (&self.d2[i], &p.d2) {
                worst = worst.max(mlp_diff(a, b));
            }
            assert_eq!(self.d2[i].is_some(), p.d2.is_some());
        }
        worst
    }
}
