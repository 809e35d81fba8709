//! Placebo prediction of the treated units' last pre-treatment period.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::panel::PanelMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceboReport<T> {
    pub estimator: &'static str,
    /// Mean of `predicted − observed` across runs.
    pub mean_error: T,
    pub run_errors: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceboOptions {
    pub runs: usize,
    /// Share of each group (treated, control) kept in a run, drawn without replacement.
    pub sample_fraction: f64,
    pub seed: u64,
}

impl Default for PlaceboOptions {
    fn default() -> Self {
        PlaceboOptions { runs: 100, sample_fraction: 0.8, seed: 0 }
    }
}

fn subsample(units: &[usize], fraction: f64, rng: &mut impl rand::Rng) -> Vec<usize> {
    let k = ((units.len() as f64 * fraction).round() as usize).clamp(1, units.len());
    let mut idx: Vec<usize> = sample(rng, units.len(), k).into_iter().map(|j| units[j]).collect();
    idx.sort_unstable();
    idx
}

/// Drops the post-treatment periods, pretends the treated units adopted in
/// the last pre-treatment period, and measures how well that period is predicted.
pub fn placebo_last_pretreat<T: Scalar>(
    panel: &PanelMatrix<T>,
    estimator: &Estimator<T>,
    opts: &PlaceboOptions,
) -> Result<PlaceboReport<T>> {
    let start = panel.adoption_period()?;
    if start < 3 {
        return Err(Error::Degenerate(format!(
            "placebo prediction needs 2 periods before the placebo year, have {}",
            start.saturating_sub(1)
        )));
    }
    if opts.runs == 0 || !(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0) {
        return Err(Error::InvalidArgument("runs must be positive and sample_fraction in (0, 1]".into()));
    }
    let placebo = start - 1;
    let treated = panel.treated_units();
    let controls = panel.control_units();
    let pre = panel.truncate_periods(start);

    let errors: Vec<Result<T>> = (0..opts.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(opts.seed, &[0x504c_4342, r as u64]);
            let mut units = subsample(&treated, opts.sample_fraction, &mut rng);
            let n_treated = units.len();
            units.extend(subsample(&controls, opts.sample_fraction, &mut rng));
            let mut p = pre.select_units(&units);
            for i in 0..n_treated {
                p.set_treated(i, placebo);
            }
            let est = match estimator {
                Estimator::Mc(s) => {
                    let mut s = s.clone();
                    s.seed = crate::rng::derive_seed(opts.seed, &[r as u64]);
                    Estimator::Mc(s)
                }
                other => other.clone(),
            };
            let cf = est.counterfactual(&p)?;
            let diffs: Vec<T> = (0..n_treated)
                .filter(|&i| p.observed[[i, placebo]] && cf.defined[[i, placebo]])
                .map(|i| cf.values[[i, placebo]] - p.values[[i, placebo]])
                .collect();
            if diffs.is_empty() {
                return Err(Error::Degenerate("no treated unit observed in the placebo period".into()));
            }
            Ok(diffs.iter().copied().sum::<T>() / T::from_count(diffs.len()))
        })
        .collect();
    let run_errors: Vec<T> = errors.into_iter().collect::<Result<_>>()?;
    let mean_error = run_errors.iter().copied().sum::<T>() / T::from_count(run_errors.len());
    Ok(PlaceboReport { estimator: estimator.name(), mean_error, run_errors })
}
