//! Odds ratios, logistic regression, L1 paths and model diagnostics.

pub mod contingency;
pub mod contrasts;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod ks;
pub mod lasso;
pub mod logistic;
pub mod lrt;
pub mod sim;

pub use contingency::{odds_ratio, ContingencyTable, OddsRatio};
pub use contrasts::{cell_counts, interaction_contrasts, CellContrast, CellCount, CellFlag, InteractionSpec};
pub use design::{DesignBuilder, DesignMatrix, INTERCEPT};
pub use diagnostics::{auc, cooks_distance, cooks_screen, deletion_change, diagnose, hosmer_lemeshow, Diagnostics, HosmerLemeshow};
pub use error::StatsError;
pub use ks::{ks_uniform, KsResult};
pub use lasso::{lambda_grid, lambda_max, lasso_path, lasso_path_with, LassoOptions, LassoPath, PathPoint};
pub use logistic::{logistic_fit, logistic_fit_with, CoefRow, FitOptions, ModelFit};
pub use lrt::{lr_test, LrTest};
