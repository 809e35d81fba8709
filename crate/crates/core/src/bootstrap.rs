//! Bootstrap ATEs combining split-level prediction uncertainty with unit resampling.
//!
//! Each replicate picks one of the `S` predicted values for every unit-year,
//! resamples control and treated units with replacement, reruns the
//! estimator, and records the per-year ATE. Intervals are percentile order
//! statistics of the recorded draws.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::panel::PanelMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

/// `S` predicted outcome matrices for the same panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEnsemble<T> {
    splits: Vec<Array2<T>>,
}

impl<T: Scalar> SplitEnsemble<T> {
    pub fn new(splits: Vec<Array2<T>>) -> Result<Self> {
        let Some(first) = splits.first() else {
            return Err(Error::Empty("ensemble needs at least one split".into()));
        };
        let dim = first.dim();
        if splits.iter().any(|s| s.dim() != dim) {
            return Err(Error::LengthMismatch("all splits must share one shape".into()));
        }
        Ok(SplitEnsemble { splits })
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    pub fn splits(&self) -> &[Array2<T>] {
        &self.splits
    }

    /// Cell-wise mean over splits.
    pub fn mean(&self) -> Array2<T> {
        let mut acc: Array2<T> = Array2::zeros(self.splits[0].dim());
        for s in &self.splits {
            acc = acc + s;
        }
        acc.mapv(|v| v / T::from_count(self.splits.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub seed: u64,
    /// Resample units with replacement. Disabled, every replicate uses the
    /// input units and only the split draw varies.
    pub resample: bool,
    /// Resample sizes; default to the observed group sizes.
    pub n_control: Option<usize>,
    pub n_treated: Option<usize>,
    /// Attempts per replicate before the run aborts.
    pub retry_cap: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { reps: 100, seed: 0, resample: true, n_control: None, n_treated: None, retry_cap: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary<T> {
    pub estimator: &'static str,
    pub reps: usize,
    /// Penalty used by every replicate, chosen once on the split-mean panel.
    pub lambda: Option<T>,
    /// Post-treatment period indices.
    pub periods: Vec<usize>,
    pub period_labels: Vec<i32>,
    /// `draws[rep][k]` is the ATE of replicate `rep` in `periods[k]`.
    pub draws: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    /// Failed attempts that were redrawn.
    pub retries: usize,
}

impl<T: Scalar> BootstrapSummary<T> {
    /// `(mean, lo, hi)` for the final period.
    pub fn headline(&self) -> (T, T, T) {
        let k = self.periods.len() - 1;
        (self.mean[k], self.lo[k], self.hi[k])
    }

    pub fn period_draws(&self, k: usize) -> Vec<T> {
        self.draws.iter().map(|d| d[k]).collect()
    }
}

/// 2.5% and 97.5% nearest-rank order statistics.
pub fn percentile_interval<T: Scalar>(draws: &[T]) -> (T, T) {
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    let rank = |q: f64| ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    (sorted[rank(0.025)], sorted[rank(0.975)])
}

fn draw_panel<T: Scalar>(
    ensemble: &SplitEnsemble<T>,
    skeleton: &PanelMatrix<T>,
    cfg: &BootstrapConfig,
    treated: &[usize],
    controls: &[usize],
    rng: &mut impl Rng,
) -> PanelMatrix<T> {
    let s = ensemble.n_splits();
    let mut p = skeleton.clone();
    for i in 0..skeleton.n_units() {
        for t in 0..skeleton.n_periods() {
            let j = if s == 1 { 0 } else { rng.gen_range(0..s) };
            p.values[[i, t]] = ensemble.splits[j][[i, t]];
        }
    }
    if !cfg.resample {
        return p;
    }
    let nt = cfg.n_treated.unwrap_or(treated.len());
    let nc = cfg.n_control.unwrap_or(controls.len());
    let mut units: Vec<usize> = (0..nt).map(|_| *treated.choose(rng).unwrap()).collect();
    units.extend((0..nc).map(|_| *controls.choose(rng).unwrap()));
    p.select_units(&units)
}

/// Runs the bootstrap. `skeleton` supplies the observation mask, treatment
/// assignment and labels; its values are ignored in favour of the ensemble.
pub fn bootstrap_ate<T: Scalar>(
    ensemble: &SplitEnsemble<T>,
    skeleton: &PanelMatrix<T>,
    estimator: &Estimator<T>,
    cfg: &BootstrapConfig,
) -> Result<BootstrapSummary<T>> {
    if ensemble.splits[0].dim() != skeleton.values.dim() {
        return Err(Error::LengthMismatch(format!(
            "ensemble is {:?}, panel is {:?}",
            ensemble.splits[0].dim(),
            skeleton.values.dim()
        )));
    }
    if cfg.reps == 0 || cfg.retry_cap == 0 {
        return Err(Error::InvalidArgument("reps and retry_cap must be positive".into()));
    }
    let start = skeleton.adoption_period()?;
    let treated = skeleton.treated_units();
    let controls = skeleton.control_units();
    if treated.len() < 2 || controls.len() < 2 {
        return Err(Error::Degenerate(format!(
            "bootstrap needs 2 treated and 2 control units, have {} and {}",
            treated.len(),
            controls.len()
        )));
    }
    let mut base = skeleton.clone();
    base.values = ensemble.mean();
    let (fixed, _) = estimator.resolved(&base)?;
    let periods: Vec<usize> = (start..skeleton.n_periods())
        .filter(|&s| treated.iter().any(|&i| skeleton.observed[[i, s]]))
        .collect();

    let results: Vec<Result<(Vec<T>, usize)>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut last = None;
            for attempt in 0..cfg.retry_cap {
                let mut rng = stream_rng(cfg.seed, &[0x424f_4f54, rep as u64, attempt as u64]);
                let panel = draw_panel(ensemble, skeleton, cfg, &treated, &controls, &mut rng);
                let outcome = fixed.estimate(&panel).and_then(|r| {
                    periods
                        .iter()
                        .map(|&s| {
                            r.effects
                                .period_ate(s)
                                .ok_or(Error::Degenerate(format!("no treated cell observed in period {s}")))
                        })
                        .collect::<Result<Vec<T>>>()
                });
                match outcome {
                    Ok(d) => return Ok((d, attempt)),
                    Err(e) => last = Some(e),
                }
            }
            Err(Error::BootstrapAborted { rep, attempts: cfg.retry_cap, source: Box::new(last.unwrap()) })
        })
        .collect();
    let mut draws = Vec::with_capacity(cfg.reps);
    let mut retries = 0;
    for r in results {
        let (d, a) = r?;
        draws.push(d);
        retries += a;
    }
    let mut mean = Vec::new();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for k in 0..periods.len() {
        let col: Vec<T> = draws.iter().map(|d| d[k]).collect();
        mean.push(col.iter().copied().sum::<T>() / T::from_count(col.len()));
        let (l, h) = percentile_interval(&col);
        lo.push(l);
        hi.push(h);
    }
    Ok(BootstrapSummary {
        estimator: fixed.name(),
        reps: cfg.reps,
        lambda: fixed.lambda(),
        period_labels: periods.iter().map(|&s| skeleton.period_labels[s]).collect(),
        periods,
        draws,
        mean,
        lo,
        hi,
        retries,
    })
}

/// One row of the effect time path; `offset` counts years since adoption from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimepathRow<T> {
    pub offset: usize,
    pub year: i32,
    pub mean: T,
    pub lo: T,
    pub hi: T,
}

/// Effects in post-treatment years 3 through 6. With fewer than six
/// post-treatment years, the last `min(4, n)` years instead.
pub fn ate_timepath<T: Scalar>(summary: &BootstrapSummary<T>) -> Vec<TimepathRow<T>> {
    let n = summary.periods.len();
    let first = summary.periods.first().copied().unwrap_or(0);
    let keep: Vec<usize> = if n >= 6 { (2..6).collect() } else { (n.saturating_sub(4)..n).collect() };
    keep.into_iter()
        .map(|k| TimepathRow {
            offset: summary.periods[k] - first + 1,
            year: summary.period_labels[k],
            mean: summary.mean[k],
            lo: summary.lo[k],
            hi: summary.hi[k],
        })
        .collect()
}

/// Writes `rep,year,ate`.
pub fn write_draws<T: Scalar, W: Write>(out: W, summary: &BootstrapSummary<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "year", "ate"])?;
    for (r, d) in summary.draws.iter().enumerate() {
        for (k, v) in d.iter().enumerate() {
            w.write_record([r.to_string(), summary.period_labels[k].to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<draws>", e))?;
    Ok(())
}

/// Writes `year,mean,lo95,hi95`.
pub fn write_summary<T: Scalar, W: Write>(out: W, summary: &BootstrapSummary<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "mean", "lo95", "hi95"])?;
    for k in 0..summary.periods.len() {
        w.write_record([
            summary.period_labels[k].to_string(),
            summary.mean[k].to_string(),
            summary.lo[k].to_string(),
            summary.hi[k].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// Synthetic panel shaped like a national electrification study: annual
/// outcomes, one adoption year, and an effect ramping linearly to
/// `final_effect` in the last year. The ensemble adds independent prediction
/// noise per split on top of the true outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountryScenario {
    pub n_control: usize,
    pub n_treated: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub adoption_year: i32,
    pub final_effect: f64,
    pub n_splits: usize,
    pub unit_sd: f64,
    pub shock_sd: f64,
    pub noise_sd: f64,
    pub split_sd: f64,
    pub seed: u64,
}

impl Default for CountryScenario {
    fn default() -> Self {
        CountryScenario {
            n_control: 3235,
            n_treated: 209,
            first_year: 2006,
            last_year: 2016,
            adoption_year: 2011,
            final_effect: 0.19,
            n_splits: 5,
            unit_sd: 1.0,
            shock_sd: 0.2,
            noise_sd: 0.1,
            split_sd: 0.15,
            seed: 0,
        }
    }
}

impl CountryScenario {
    /// True effect in `year`.
    pub fn effect(&self, year: i32) -> f64 {
        if year < self.adoption_year {
            return 0.0;
        }
        let span = (self.last_year - self.adoption_year + 1) as f64;
        self.final_effect * (year - self.adoption_year + 1) as f64 / span
    }

    /// The treated-and-control skeleton (true outcomes) and the split ensemble.
    pub fn generate<T: Scalar>(&self) -> Result<(PanelMatrix<T>, SplitEnsemble<T>)> {
        if self.last_year <= self.adoption_year || self.adoption_year <= self.first_year {
            return Err(Error::InvalidArgument("need first_year < adoption_year < last_year".into()));
        }
        if self.n_splits == 0 || self.n_control == 0 || self.n_treated == 0 {
            return Err(Error::InvalidArgument("unit and split counts must be positive".into()));
        }
        let n = self.n_control + self.n_treated;
        let t = (self.last_year - self.first_year + 1) as usize;
        let start = (self.adoption_year - self.first_year) as usize;
        let mut rng = stream_rng(self.seed, &[0x434f_554e, n as u64]);
        let normal = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()));
        let (unit, shock, noise, split) =
            (normal(self.unit_sd)?, normal(self.shock_sd)?, normal(self.noise_sd)?, normal(self.split_sd)?);
        let u: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..t).map(|_| shock.sample(&mut rng)).collect();
        let truth = Array2::from_shape_fn((n, t), |(i, s)| {
            let year = self.first_year + s as i32;
            let tau = if i < self.n_treated { self.effect(year) } else { 0.0 };
            u[i] + v[s] + tau + noise.sample(&mut rng)
        });
        let splits = (0..self.n_splits)
            .map(|_| truth.mapv(|y| T::lit(y + split.sample(&mut rng))))
            .collect();
        let mut panel = PanelMatrix::from_values(truth.mapv(T::lit));
        panel.unit_ids = (0..n).map(|i| if i < self.n_treated { format!("t{i}") } else { format!("c{i}") }).collect();
        panel.period_labels = (self.first_year..=self.last_year).collect();
        for i in 0..self.n_treated {
            panel.set_treated(i, start);
        }
        Ok((panel, SplitEnsemble::new(splits)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_interval() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_interval(&draws), (3.0, 98.0));
        assert_eq!(percentile_interval(&[5.0]), (5.0, 5.0));
    }

    #[test]
    fn ensemble_checks_shapes() {
        assert!(SplitEnsemble::<f64>::new(vec![]).is_err());
        assert!(SplitEnsemble::new(vec![Array2::<f64>::zeros((2, 2)), Array2::zeros((2, 3))]).is_err());
        let e = SplitEnsemble::new(vec![Array2::from_elem((2, 2), 1.0), Array2::from_elem((2, 2), 3.0)]).unwrap();
        assert!(e.mean().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn effect_ramp() {
        let c = CountryScenario::default();
        assert_eq!(c.effect(2010), 0.0);
        assert!((c.effect(2016) - 0.19).abs() < 1e-15);
        assert!(c.effect(2012) < c.effect(2013));
    }

    fn summary(n: usize) -> BootstrapSummary<f64> {
        BootstrapSummary {
            estimator: "dd",
            reps: 1,
            lambda: None,
            periods: (4..4 + n).collect(),
            period_labels: (2011..2011 + n as i32).collect(),
            draws: vec![vec![0.0; n]],
            mean: (0..n).map(|k| k as f64).collect(),
            lo: vec![0.0; n],
            hi: vec![0.0; n],
            retries: 0,
        }
    }

    #[test]
    fn timepath_rows() {
        let six = ate_timepath(&summary(6));
        assert_eq!(six.iter().map(|r| r.offset).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
        assert_eq!(six[0].year, 2013);
        assert_eq!(ate_timepath(&summary(1)).len(), 1);
        assert_eq!(ate_timepath(&summary(5)).len(), 4);
    }
}
