//! Synthetic controls with elastic-net weights.
//!
//! Transposed mode (the default) regresses, for every post-treatment period,
//! the controls' values in that period on their pre-treatment series and
//! applies the resulting year weights to each treated unit. Standard mode
//! regresses each treated unit's pre-treatment series on the controls.

use ndarray::Array2;
use rayon::prelude::*;

use super::effects::Counterfactual;
use super::elastic_net::{elastic_net, EnetOptions};
use super::{geometric_grid, pick_lambda, CvOutcome};
use crate::error::{Error, Result};
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScenMode {
    /// Weights on pre-treatment years, one regression per post-treatment period.
    #[default]
    Transposed,
    /// Weights on control units, one regression per treated unit.
    Standard,
}

impl std::str::FromStr for ScenMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transposed" => Ok(ScenMode::Transposed),
            "standard" => Ok(ScenMode::Standard),
            other => Err(Error::InvalidArgument(format!("unknown SC-EN mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenFit<T> {
    pub mode: ScenMode,
    pub alpha: T,
    pub lambda: T,
    /// Period index (transposed) or treated unit index (standard) of each regression.
    pub targets: Vec<usize>,
    pub intercepts: Vec<T>,
    /// One weight vector per regression: over pre-treatment periods (transposed)
    /// or over `donors` (standard).
    pub weights: Vec<Vec<T>>,
    pub donors: Vec<usize>,
    pub counterfactual: Counterfactual<T>,
}

fn fully_observed<T: Scalar>(panel: &PanelMatrix<T>, i: usize, periods: std::ops::Range<usize>) -> bool {
    periods.into_iter().all(|s| panel.observed[[i, s]])
}

fn layout<T: Scalar>(panel: &PanelMatrix<T>) -> Result<usize> {
    let start = panel.adoption_period()?;
    if start < 2 {
        return Err(Error::Degenerate(format!("SC-EN needs 2 pre-treatment periods, have {start}")));
    }
    Ok(start)
}

/// Fits SC-EN at a fixed penalty.
pub fn scen_fit<T: Scalar>(
    panel: &PanelMatrix<T>,
    alpha: T,
    lambda: T,
    mode: ScenMode,
    opts: &EnetOptions<T>,
) -> Result<ScenFit<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    let start = layout(panel)?;
    let (n, t) = panel.values.dim();
    let treated = panel.treated_units();
    let controls: Vec<usize> = panel
        .control_units()
        .into_iter()
        .filter(|&i| fully_observed(panel, i, 0..start))
        .collect();
    let mut values = Array2::<T>::zeros((n, t));
    let mut defined = Array2::from_elem((n, t), false);

    match mode {
        ScenMode::Transposed => {
            if controls.len() < 2 {
                return Err(Error::Degenerate("transposed SC-EN needs 2 fully observed controls".into()));
            }
            let fits: Vec<Result<_>> = (start..t)
                .into_par_iter()
                .map(|s| {
                    let rows: Vec<usize> = controls.iter().copied().filter(|&i| panel.observed[[i, s]]).collect();
                    if rows.len() < 2 {
                        return Err(Error::Degenerate(format!("period {s}: fewer than 2 observed controls")));
                    }
                    let x = Array2::from_shape_fn((rows.len(), start), |(r, c)| panel.values[[rows[r], c]]);
                    let y: Vec<T> = rows.iter().map(|&i| panel.values[[i, s]]).collect();
                    elastic_net(x.view(), &y, alpha, lambda, opts)
                })
                .collect();
            let mut intercepts = Vec::new();
            let mut weights = Vec::new();
            for (s, fit) in (start..t).zip(fits) {
                let fit = fit?;
                for &i in &treated {
                    if fully_observed(panel, i, 0..start) {
                        let pre: Vec<T> = (0..start).map(|c| panel.values[[i, c]]).collect();
                        values[[i, s]] = fit.predict(&pre);
                        defined[[i, s]] = true;
                    }
                }
                intercepts.push(fit.intercept);
                weights.push(fit.weights);
            }
            Ok(ScenFit {
                mode,
                alpha,
                lambda,
                targets: (start..t).collect(),
                intercepts,
                weights,
                donors: controls,
                counterfactual: Counterfactual { values, defined },
            })
        }
        ScenMode::Standard => {
            let donors: Vec<usize> = controls.into_iter().filter(|&i| fully_observed(panel, i, 0..t)).collect();
            if donors.is_empty() {
                return Err(Error::Degenerate("standard SC-EN needs a fully observed control".into()));
            }
            let x = Array2::from_shape_fn((start, donors.len()), |(r, c)| panel.values[[donors[c], r]]);
            let targets: Vec<usize> =
                treated.iter().copied().filter(|&i| fully_observed(panel, i, 0..start)).collect();
            let fits: Vec<Result<_>> = targets
                .par_iter()
                .map(|&i| {
                    let y: Vec<T> = (0..start).map(|c| panel.values[[i, c]]).collect();
                    elastic_net(x.view(), &y, alpha, lambda, opts)
                })
                .collect();
            let mut intercepts = Vec::new();
            let mut weights = Vec::new();
            for (&i, fit) in targets.iter().zip(fits) {
                let fit = fit?;
                for s in start..t {
                    let col: Vec<T> = donors.iter().map(|&d| panel.values[[d, s]]).collect();
                    values[[i, s]] = fit.predict(&col);
                    defined[[i, s]] = true;
                }
                intercepts.push(fit.intercept);
                weights.push(fit.weights);
            }
            Ok(ScenFit {
                mode,
                alpha,
                lambda,
                targets,
                intercepts,
                weights,
                donors,
                counterfactual: Counterfactual { values, defined },
            })
        }
    }
}

/// Smallest penalty that zeroes every weight, taken over the regressions of `mode`.
pub fn scen_lambda_max<T: Scalar>(panel: &PanelMatrix<T>, alpha: T, mode: ScenMode) -> Result<T> {
    let start = layout(panel)?;
    let t = panel.n_periods();
    let controls: Vec<usize> =
        panel.control_units().into_iter().filter(|&i| fully_observed(panel, i, 0..t)).collect();
    if controls.len() < 2 {
        return Err(Error::Degenerate("need 2 fully observed controls".into()));
    }
    let a = alpha.max(T::lit(1e-3));
    let max_corr = |x: &Array2<T>, y: &[T]| -> T {
        let nf = T::from_count(y.len());
        let ybar = y.iter().copied().sum::<T>() / nf;
        let mut best = T::zero();
        for c in x.columns() {
            let m = c.iter().copied().sum::<T>() / nf;
            let dot: T = c.iter().zip(y).map(|(&u, &v)| (u - m) * (v - ybar)).sum();
            best = best.max(dot.abs() / nf);
        }
        best
    };
    let mut best = T::zero();
    match mode {
        ScenMode::Transposed => {
            let x = Array2::from_shape_fn((controls.len(), start), |(r, c)| panel.values[[controls[r], c]]);
            for s in start..t {
                let y: Vec<T> = controls.iter().map(|&i| panel.values[[i, s]]).collect();
                best = best.max(max_corr(&x, &y));
            }
        }
        ScenMode::Standard => {
            let x = Array2::from_shape_fn((start, controls.len()), |(r, c)| panel.values[[controls[c], r]]);
            for &i in &controls {
                let y: Vec<T> = (0..start).map(|c| panel.values[[i, c]]).collect();
                best = best.max(max_corr(&x, &y));
            }
        }
    }
    Ok(best / a)
}

/// Default SC-EN penalty grid: ten geometric steps down from the all-zero penalty.
pub fn scen_default_grid<T: Scalar>(panel: &PanelMatrix<T>, alpha: T, mode: ScenMode) -> Result<Vec<T>> {
    let top = scen_lambda_max(panel, alpha, mode)?;
    let top = if top > T::zero() { top } else { T::one() };
    Ok(geometric_grid(top, T::lit(1e-3), 10))
}

/// Chooses λ by k-fold cross-validation over control units: each fold's
/// controls are treated as if they adopted at the real adoption period and
/// predicted from the remaining controls. Folds are assigned round-robin.
pub fn scen_cv_lambda<T: Scalar>(
    panel: &PanelMatrix<T>,
    alpha: T,
    grid: &[T],
    folds: usize,
    mode: ScenMode,
    opts: &EnetOptions<T>,
) -> Result<CvOutcome<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let start = layout(panel)?;
    let controls = panel.control_units();
    if folds < 2 || controls.len() < folds {
        return Err(Error::Degenerate(format!("{} controls cannot fill {folds} folds", controls.len())));
    }
    if grid.len() == 1 {
        return Ok(CvOutcome { lambda: grid[0], scores: vec![(grid[0], T::nan())] });
    }
    let base = panel.select_units(&controls);
    let fold_panels: Vec<PanelMatrix<T>> = (0..folds)
        .map(|f| {
            let mut p = base.clone();
            for k in (f..controls.len()).step_by(folds) {
                p.set_treated(k, start);
            }
            p
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..folds).flat_map(|f| (0..grid.len()).map(move |g| (f, g))).collect();
    let results: Vec<Result<(T, usize)>> = jobs
        .par_iter()
        .map(|&(f, g)| {
            let p = &fold_panels[f];
            let fit = scen_fit(p, alpha, grid[g], mode, opts).map_err(|e| Error::Fold { fold: f, source: Box::new(e) })?;
            let mut sse = T::zero();
            let mut count = 0;
            for i in p.treated_units() {
                for s in start..p.n_periods() {
                    if p.observed[[i, s]] && fit.counterfactual.defined[[i, s]] {
                        let e = p.values[[i, s]] - fit.counterfactual.values[[i, s]];
                        sse += e * e;
                        count += 1;
                    }
                }
            }
            Ok((sse, count))
        })
        .collect();
    let mut sse = vec![T::zero(); grid.len()];
    let mut counts = vec![0usize; grid.len()];
    for (&(_, g), r) in jobs.iter().zip(results) {
        let (s, c) = r?;
        sse[g] += s;
        counts[g] += c;
    }
    let scores: Vec<(T, T)> = grid
        .iter()
        .zip(sse.iter().zip(&counts))
        .map(|(&l, (&s, &c))| (l, if c == 0 { T::infinity() } else { s / T::from_count(c) }))
        .collect();
    Ok(CvOutcome { lambda: pick_lambda(&scores), scores })
}
