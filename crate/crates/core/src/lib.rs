//! Causal effect estimation on panels of predicted household wealth.
//!
//! The crate covers the path from survey assets to effect estimates:
//! a PCA wealth index ([`wealth_index`]), a surrogate predictor trained with a
//! quintile-bias penalty ([`bias_loss`]), three counterfactual estimators
//! (two-way fixed-effects difference-in-differences, elastic-net synthetic
//! control and nuclear-norm matrix completion, see [`estimators`]), their
//! validation by simulation and cross-validation ([`validation`]), and a
//! bootstrap over prediction splits and units ([`bootstrap`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`.
//!
//! ```
//! use wealth_causal::{Estimator, PanelMatrix};
//! use ndarray::Array2;
//!
//! let y = Array2::from_shape_fn((6, 4), |(i, t)| i as f64 + 0.5 * t as f64);
//! let mut panel = PanelMatrix::from_values(y);
//! panel.set_treated(0, 2);
//! let fit = Estimator::Dd.estimate(&panel).unwrap();
//! assert!(fit.effects.ate.abs() < 1e-12);
//! ```

pub mod error;
pub mod linalg;
pub mod panel;
pub mod rng;
pub mod scalar;
pub mod wealth_index;
pub mod bias_loss;
pub mod bootstrap;
pub mod estimators;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PanelMatrix = panel::PanelMatrix<f64>;
pub type Estimator = estimators::Estimator<f64>;
pub type EstimatorResult = estimators::EstimatorResult<f64>;
pub type EffectTable = estimators::EffectTable<f64>;
pub type Counterfactual = estimators::Counterfactual<f64>;
pub type DdResult = estimators::DdResult<f64>;
pub type ScenFit = estimators::ScenFit<f64>;
pub type McFit = estimators::McFit<f64>;
pub type McSettings = estimators::McSettings<f64>;
pub type ScenSettings = estimators::ScenSettings<f64>;
pub type SplitEnsemble = bootstrap::SplitEnsemble<f64>;
pub type BootstrapSummary = bootstrap::BootstrapSummary<f64>;
pub type AssetTable = wealth_index::AssetTable<f64>;
pub type WealthIndex = wealth_index::WealthIndex<f64>;
pub type LossConfig = bias_loss::LossConfig<f64>;
pub type SurrogateModel = bias_loss::SurrogateModel<f64>;
pub type ValidationReport = validation::ValidationReport<f64>;
