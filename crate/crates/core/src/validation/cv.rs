//! K-fold cross-validation over control units.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

/// Prediction quality of an estimator on held-out controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub estimator: &'static str,
    /// Post-split period indices, one entry per reported year.
    pub periods: Vec<usize>,
    /// Mean of predicted minus observed over held-out controls, per period.
    pub mean_difference: Vec<T>,
    /// Root mean squared prediction error per period.
    pub rmse_by_period: Vec<T>,
    /// Root mean squared prediction error over all held-out cells.
    pub rmse: T,
    /// Fold of each control, in control order.
    pub folds: Vec<usize>,
}

/// Round-robin fold labels for `n` units.
pub fn fold_assignment(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i % k).collect()
}

/// Holds out each fold of controls from `split` onward, predicts those cells
/// from the remaining controls, and scores the predictions. Treated units are
/// not used. `split` defaults to the panel's adoption period.
pub fn kfold_control_cv<T: Scalar>(
    panel: &PanelMatrix<T>,
    k: usize,
    estimator: &Estimator<T>,
    split: Option<usize>,
) -> Result<ValidationReport<T>> {
    let split = match split {
        Some(s) => s,
        None => panel.adoption_period()?,
    };
    let t = panel.n_periods();
    if split == 0 || split >= t {
        return Err(Error::InvalidArgument(format!("split period {split} must lie in 1..{t}")));
    }
    let controls = panel.control_units();
    if k < 2 || controls.len() < k {
        return Err(Error::Degenerate(format!("{} controls cannot fill {k} folds", controls.len())));
    }
    let base = panel.select_units(&controls);
    let folds = fold_assignment(controls.len(), k);

    let per_fold: Vec<Result<Vec<(usize, usize, T)>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let mut p = base.clone();
            for (i, &g) in folds.iter().enumerate() {
                if g == f {
                    p.set_treated(i, split);
                }
            }
            let cf = estimator.counterfactual(&p).map_err(|e| Error::Fold { fold: f, source: Box::new(e) })?;
            let mut errs = Vec::new();
            for (i, &g) in folds.iter().enumerate() {
                if g != f {
                    continue;
                }
                for s in split..t {
                    if !p.observed[[i, s]] {
                        continue;
                    }
                    if !cf.defined[[i, s]] {
                        return Err(Error::Fold {
                            fold: f,
                            source: Box::new(Error::MissingCounterfactual { unit: controls[i], period: s }),
                        });
                    }
                    errs.push((i, s, cf.values[[i, s]] - p.values[[i, s]]));
                }
            }
            Ok(errs)
        })
        .collect();

    let mut sum = vec![T::zero(); t];
    let mut sq = vec![T::zero(); t];
    let mut count = vec![0usize; t];
    for errs in per_fold {
        for (_, s, e) in errs? {
            sum[s] += e;
            sq[s] += e * e;
            count[s] += 1;
        }
    }
    let periods: Vec<usize> = (split..t).filter(|&s| count[s] > 0).collect();
    let mean_difference = periods.iter().map(|&s| sum[s] / T::from_count(count[s])).collect();
    let rmse_by_period = periods.iter().map(|&s| (sq[s] / T::from_count(count[s])).sqrt()).collect();
    let total: usize = count.iter().sum();
    let rmse = (sq.iter().copied().sum::<T>() / T::from_count(total.max(1))).sqrt();
    Ok(ValidationReport { estimator: estimator.name(), periods, mean_difference, rmse_by_period, rmse, folds })
}
