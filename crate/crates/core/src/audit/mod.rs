//! Leave-one-out membership-inference auditing with shadow models, and
//! selection of the records most exposed to it.

mod attack;
mod features;
mod shadows;
mod vulnerable;

use serde::{Deserialize, Serialize};

pub use attack::{auc, null_attack, run_attack, AttackConfig, AttackResult, KindResult};
pub use features::{
    extract_corr, extract_encoded, extract_matrix, extract_naive, naive_columns, FeatureKind,
    FeatureVector,
};
pub use shadows::{
    train_shadows_asif, train_shadows_assd, write_feature_csv, AuditMethod, GanShadowTrainer,
    ShadowTrainer,
};
pub use vulnerable::{
    find_vulnerable_nn, find_vulnerable_outlier, quantile, record_distance, NnReport, OutlierReport,
};

/// Outcome of one audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub method: AuditMethod,
    pub target: usize,
    pub config: AttackConfig,
    /// Noise multiplier of the audited trainer, if private.
    pub dp_sigma: Option<f64>,
    pub attack: AttackResult,
    /// The same protocol with shuffled world labels.
    pub null: Option<AttackResult>,
}
