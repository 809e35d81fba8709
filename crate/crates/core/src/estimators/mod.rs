//! Counterfactual estimators: DD, SC-EN and matrix completion, behind a common
//! [`Estimator`] interface.

pub mod dd;
pub mod effects;
pub mod elastic_net;
pub mod mc;
pub mod scen;

pub use dd::{dd_counterfactual, dd_twfe, dd_two_unit, pretrend_test, DdResult, PretrendResult};
pub use effects::{effects_from_counterfactual, write_effects, CellEffect, Counterfactual, EffectTable};
pub use elastic_net::{elastic_net, soft_threshold, EnetFit, EnetOptions};
pub use mc::{matrix_complete, matrix_complete_lenient, mc_cv_lambda, mc_default_grid, mc_lambda_max, McFit, McOptions};
pub use scen::{scen_cv_lambda, scen_default_grid, scen_fit, scen_lambda_max, ScenFit, ScenMode};

use crate::error::{Error, Result};
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

/// Cross-validation scores `(λ, error)` and the chosen λ.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<T> {
    pub lambda: T,
    pub scores: Vec<(T, T)>,
}

/// Lowest score wins; among equal scores the larger λ.
pub(crate) fn pick_lambda<T: Scalar>(scores: &[(T, T)]) -> T {
    let mut best = scores[0];
    for &(l, s) in &scores[1..] {
        if s < best.1 || (s == best.1 && l > best.0) {
            best = (l, s);
        }
    }
    best.0
}

/// `steps` values from `top` down to `top * ratio`, evenly spaced in log scale.
pub fn geometric_grid<T: Scalar>(top: T, ratio: T, steps: usize) -> Vec<T> {
    if steps <= 1 {
        return vec![top];
    }
    let last = T::from_count(steps - 1);
    (0..steps)
        .map(|k| top * ratio.powf(T::from_count(k) / last))
        .collect()
}

/// How a penalty is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Tuning<T> {
    Fixed(T),
    /// Cross-validate over the grid; an empty grid means the estimator's default grid.
    Cv(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings<T> {
    pub lambda: Tuning<T>,
    pub options: McOptions<T>,
    pub holdout_fraction: f64,
    pub cv_reps: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for McSettings<T> {
    fn default() -> Self {
        McSettings {
            lambda: Tuning::Cv(Vec::new()),
            options: McOptions::default(),
            holdout_fraction: 0.1,
            cv_reps: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenSettings<T> {
    pub alpha: T,
    pub lambda: Tuning<T>,
    pub mode: ScenMode,
    pub folds: usize,
    pub options: EnetOptions<T>,
}

impl<T: Scalar> Default for ScenSettings<T> {
    fn default() -> Self {
        ScenSettings {
            alpha: T::lit(0.5),
            lambda: Tuning::Cv(Vec::new()),
            mode: ScenMode::Transposed,
            folds: 5,
            options: EnetOptions::default(),
        }
    }
}

/// Estimator choice with its settings.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator<T> {
    Dd,
    Mc(McSettings<T>),
    Scen(ScenSettings<T>),
}

/// Full output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult<T> {
    pub estimator: &'static str,
    pub lambda: Option<T>,
    pub cv: Option<CvOutcome<T>>,
    pub counterfactual: Counterfactual<T>,
    pub effects: EffectTable<T>,
}

impl<T: Scalar> Estimator<T> {
    /// Default settings for a name among `dd`, `mc`, `scen` (alias `sc-en`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "dd" => Ok(Estimator::Dd),
            "mc" => Ok(Estimator::Mc(McSettings::default())),
            "scen" | "sc-en" => Ok(Estimator::Scen(ScenSettings::default())),
            other => Err(Error::InvalidArgument(format!("unknown estimator '{other}' (dd, mc, scen)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Dd => "dd",
            Estimator::Mc(_) => "mc",
            Estimator::Scen(_) => "scen",
        }
    }

    /// Resolves a cross-validated penalty on `panel`, returning the CV trace.
    pub fn tune(&self, panel: &PanelMatrix<T>) -> Result<Option<CvOutcome<T>>> {
        match self {
            Estimator::Dd => Ok(None),
            Estimator::Mc(s) => match &s.lambda {
                Tuning::Fixed(_) => Ok(None),
                Tuning::Cv(grid) => {
                    let grid = if grid.is_empty() { mc_default_grid(panel)? } else { grid.clone() };
                    mc_cv_lambda(panel, &grid, s.holdout_fraction, s.cv_reps, s.seed, &s.options).map(Some)
                }
            },
            Estimator::Scen(s) => match &s.lambda {
                Tuning::Fixed(_) => Ok(None),
                Tuning::Cv(grid) => {
                    let grid = if grid.is_empty() { scen_default_grid(panel, s.alpha, s.mode)? } else { grid.clone() };
                    scen_cv_lambda(panel, s.alpha, &grid, s.folds, s.mode, &s.options).map(Some)
                }
            },
        }
    }

    /// The same estimator with its penalty fixed to the CV choice on `panel`.
    pub fn resolved(&self, panel: &PanelMatrix<T>) -> Result<(Self, Option<CvOutcome<T>>)> {
        let cv = self.tune(panel)?;
        let fixed = match (self, &cv) {
            (Estimator::Mc(s), Some(c)) => Estimator::Mc(McSettings { lambda: Tuning::Fixed(c.lambda), ..s.clone() }),
            (Estimator::Scen(s), Some(c)) => {
                Estimator::Scen(ScenSettings { lambda: Tuning::Fixed(c.lambda), ..s.clone() })
            }
            _ => self.clone(),
        };
        Ok((fixed, cv))
    }

    pub fn lambda(&self) -> Option<T> {
        match self {
            Estimator::Mc(McSettings { lambda: Tuning::Fixed(l), .. })
            | Estimator::Scen(ScenSettings { lambda: Tuning::Fixed(l), .. }) => Some(*l),
            _ => None,
        }
    }

    /// Counterfactual untreated outcomes, tuning the penalty first if needed.
    pub fn counterfactual(&self, panel: &PanelMatrix<T>) -> Result<Counterfactual<T>> {
        Ok(self.run(panel)?.0)
    }

    fn run(&self, panel: &PanelMatrix<T>) -> Result<(Counterfactual<T>, Option<T>, Option<CvOutcome<T>>)> {
        let (fixed, cv) = self.resolved(panel)?;
        let lambda = fixed.lambda();
        let cf = match &fixed {
            Estimator::Dd => {
                panel.adoption_period()?;
                dd_counterfactual(panel)?
            }
            Estimator::Mc(s) => {
                let l = lambda.expect("resolved");
                matrix_complete(panel, l, &s.options)?.counterfactual()
            }
            Estimator::Scen(s) => {
                let l = lambda.expect("resolved");
                scen_fit(panel, s.alpha, l, s.mode, &s.options)?.counterfactual
            }
        };
        Ok((cf, lambda, cv))
    }

    /// Counterfactual plus effects on the treated.
    pub fn estimate(&self, panel: &PanelMatrix<T>) -> Result<EstimatorResult<T>> {
        let (counterfactual, lambda, cv) = self.run(panel)?;
        let effects = effects_from_counterfactual(panel, &counterfactual)?;
        Ok(EstimatorResult { estimator: self.name(), lambda, cv, counterfactual, effects })
    }
}
