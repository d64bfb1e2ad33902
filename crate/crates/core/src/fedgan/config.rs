use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// Party critics with a private second part plus the shared server critic.
    Vflgan,
    /// Party critics reduced to their first part; only the server critic scores.
    VflganBase,
    /// Independent party WGAN-GPs whose generator backbones are averaged HFL-style.
    Vertigan,
    /// One WGAN-GP on the concatenated table.
    Central,
}

impl Variant {
    pub fn is_vertical(self) -> bool {
        matches!(self, Variant::Vflgan | Variant::VflganBase)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vflgan => "VFLGAN",
            Variant::VflganBase => "VFLGAN_BASE",
            Variant::Vertigan => "VERTIGAN",
            Variant::Central => "CENTRAL",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "VFLGAN" => Ok(Variant::Vflgan),
            "VFLGAN_BASE" => Ok(Variant::VflganBase),
            "VERTIGAN" => Ok(Variant::Vertigan),
            "CENTRAL" => Ok(Variant::Central),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}"))),
        }
    }
}

/// Architecture and optimization settings shared by every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    /// Hidden widths of each generator (ReLU).
    pub gen_hidden: Vec<usize>,
    /// Hidden widths of the first critic part, before the intermediate feature.
    pub disc_hidden: Vec<usize>,
    /// Width of each party's intermediate feature.
    pub feature_width: usize,
    /// Hidden widths of the second critic part.
    pub disc2_hidden: Vec<usize>,
    /// Hidden widths of the server critic.
    pub server_hidden: Vec<usize>,
    pub lambda_gp: f64,
    /// Weight of the server critic loss in the party critic gradients.
    pub lambda1: f64,
    /// Weight of the server critic score in the generator loss.
    pub lambda2: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub lr_ds: f64,
    pub batch_size: usize,
    pub disc_steps: usize,
    pub epochs: usize,
    pub temperature: f64,
    /// Synthetic rows drawn for the per-epoch FD; capped at the training size.
    pub fd_sample: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            gen_hidden: vec![64, 64],
            disc_hidden: vec![64],
            feature_width: 32,
            disc2_hidden: vec![32],
            server_hidden: vec![64],
            lambda_gp: 10.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lr_g: 1e-4,
            lr_d: 1e-4,
            lr_ds: 1e-4,
            batch_size: 64,
            disc_steps: 5,
            epochs: 300,
            temperature: 0.2,
            fd_sample: 2048,
        }
    }
}

impl GanConfig {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("feature_width", self.feature_width),
            ("batch_size", self.batch_size),
            ("disc_steps", self.disc_steps),
            ("fd_sample", self.fd_sample),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.gen_hidden.is_empty() {
            return bad("gen_hidden needs at least one layer".into());
        }
        let widths = [
            &self.gen_hidden,
            &self.disc_hidden,
            &self.disc2_hidden,
            &self.server_hidden,
        ];
        if widths.iter().any(|w| w.contains(&0)) {
            return bad("hidden widths must be positive".into());
        }
        for (name, v) in [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("lr_ds", self.lr_ds),
            ("temperature", self.temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("lambda_gp", self.lambda_gp),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.batch_size > n_rows {
            return bad(format!(
                "batch size {} exceeds {n_rows} training rows",
                self.batch_size
            ));
        }
        Ok(())
    }
}
