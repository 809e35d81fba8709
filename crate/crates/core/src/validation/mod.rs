//! Estimator validation: held-out control prediction, placebo prediction of
//! the last pre-treatment period, and Monte Carlo bias studies.

pub mod cv;
pub mod placebo;
pub mod sim;

pub use cv::{fold_assignment, kfold_control_cv, ValidationReport};
pub use placebo::{placebo_last_pretreat, PlaceboOptions, PlaceboReport};
pub use sim::{
    generate_panel, simulate_berkson, simulate_pretrend, simulate_pretrend_rejection, write_bias_curves,
    BerksonRow, BiasPoint, RejectionRates, SimPanel, SimScenario,
};
