//! Fréchet distance and classifier-based utility of synthetic tables.

mod forest;
mod frechet;
mod linalg;
mod utility;

pub use forest::{train_forest, Forest, Node, Tree, DEFAULT_TREES};
pub use frechet::{dataset_stats, frechet_between, frechet_distance, DatasetStats};
pub use linalg::{psd_sqrt, symmetric_eigen, JACOBI_MAX_SWEEPS, JACOBI_TOL};
pub use utility::{
    accuracy, classification_view, cross_fit, cross_validate, fold_bounds, macro_f1,
    utility_fourway, Scores, UtilityReport, CV_FOLDS,
};
