//! Outcome prediction under a loss that penalizes the worst quintile-specific
//! bias, and the attenuation diagnostics that motivate it.

pub mod diagnostics;
pub mod loss;
pub mod surrogate;
pub mod synthetic;

pub use diagnostics::{berkson_dd_bias, slope_diagnostic, BerksonMap};
pub use loss::{custom_loss, sample_quintile_bias, LossComponents, LossConfig};
pub use surrogate::{
    loss_and_gradient, select_lambda_b, sweep_lambda_b, train_surrogate, Architecture, SurrogateModel,
    SurrogateParams, SweepPoint,
};
pub use synthetic::heteroscedastic_task;

/// The λ_b values swept in the reference study.
pub const LAMBDA_B_SWEEP: [f64; 5] = [0.0, 1.0, 3.0, 5.0, 7.5];
