//! Monte Carlo harness: pre-trend bias of DD and MC under trend-correlated
//! selection, Berkson attenuation, and the size of the placebo pre-trend test.
//!
//! Outcomes follow `y_it = u_i + v_t + rate·t·d_i + effect·τ_it + e_it` with
//! `u_i ~ N(0, 1)`, `v_t ~ N(0, 0.2²)`, `e_it ~ N(0, noise_sd²)` and a drift
//! indicator `d_i ~ Bernoulli(drift_share)`. Under correlated selection,
//! treated units are drawn without replacement with weight
//! `1 + selection_strength·d_i`. Draws never depend on `rate`, so every rate in
//! a sweep sees the same units, shocks and noise.

use rand::seq::SliceRandom;
use rand_distr::{Bernoulli, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias_loss::BerksonMap;
use crate::error::{Error, Result};
use crate::estimators::{pretrend_test, Estimator};
use crate::panel::PanelMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimScenario {
    pub n_units: usize,
    pub n_periods: usize,
    pub treat_share: f64,
    pub effect: f64,
    pub pretrend_rate: f64,
    pub selection_correlated: bool,
    pub noise_sd: f64,
    /// `(alpha, phi)` applied to every outcome after generation.
    pub berkson: Option<(f64, f64)>,
    pub seed: u64,
    pub drift_share: f64,
    pub selection_strength: f64,
    pub unit_sd: f64,
    pub shock_sd: f64,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n_units: 100,
            n_periods: 20,
            treat_share: 0.2,
            effect: 1.0,
            pretrend_rate: 0.0,
            selection_correlated: false,
            noise_sd: 0.3,
            berkson: None,
            seed: 0,
            drift_share: 0.5,
            selection_strength: 4.0,
            unit_sd: 1.0,
            shock_sd: 0.2,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_periods < 4 {
            return Err(Error::InvalidArgument(format!("n_periods must be at least 4, got {}", self.n_periods)));
        }
        if !(self.treat_share > 0.0 && self.treat_share < 1.0) {
            return Err(Error::InvalidArgument("treat_share must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.drift_share) {
            return Err(Error::InvalidArgument("drift_share must lie in [0, 1]".into()));
        }
        if !(self.noise_sd >= 0.0 && self.unit_sd >= 0.0 && self.shock_sd >= 0.0 && self.selection_strength >= 0.0) {
            return Err(Error::InvalidArgument("standard deviations and selection strength must be non-negative".into()));
        }
        let n_treated = self.n_treated();
        if n_treated == 0 || n_treated >= self.n_units {
            return Err(Error::InvalidArgument(format!(
                "{} units with treat_share {} leave an empty group",
                self.n_units, self.treat_share
            )));
        }
        Ok(())
    }

    pub fn n_treated(&self) -> usize {
        (self.treat_share * self.n_units as f64).round() as usize
    }

    /// First treated period (0-based), the period after the first half.
    pub fn start_period(&self) -> usize {
        self.n_periods / 2
    }
}

/// One generated panel with its drift indicators.
#[derive(Debug, Clone)]
pub struct SimPanel<T> {
    pub panel: PanelMatrix<T>,
    pub drift: Vec<bool>,
}

/// Generates replicate `rep` of `scn`.
pub fn generate_panel<T: Scalar>(scn: &SimScenario, rep: u64) -> Result<SimPanel<T>> {
    scn.validate()?;
    let (n, t) = (scn.n_units, scn.n_periods);
    let mut rng = stream_rng(scn.seed, &[0x5349_4d50, rep, t as u64, n as u64]);
    let std = |sd: f64| Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()));
    let unit = std(scn.unit_sd)?;
    let shock = std(scn.shock_sd)?;
    let noise = std(scn.noise_sd)?;
    let coin = Bernoulli::new(scn.drift_share).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let u: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
    let v: Vec<f64> = (0..t).map(|_| shock.sample(&mut rng)).collect();
    let drift: Vec<bool> = (0..n).map(|_| coin.sample(&mut rng)).collect();
    let e: Vec<f64> = (0..n * t).map(|_| noise.sample(&mut rng)).collect();

    let ids: Vec<usize> = (0..n).collect();
    let weight = |&i: &usize| {
        if scn.selection_correlated && drift[i] {
            1.0 + scn.selection_strength
        } else {
            1.0
        }
    };
    let mut treated: Vec<usize> = ids
        .choose_multiple_weighted(&mut rng, scn.n_treated(), weight)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .copied()
        .collect();
    treated.sort_unstable();

    let start = scn.start_period();
    let mut is_treated = vec![false; n];
    for &i in &treated {
        is_treated[i] = true;
    }
    let values = ndarray::Array2::from_shape_fn((n, t), |(i, s)| {
        let trend = if drift[i] { scn.pretrend_rate * s as f64 } else { 0.0 };
        let tau = if is_treated[i] && s >= start { scn.effect } else { 0.0 };
        let y = u[i] + v[s] + trend + tau + e[i * t + s];
        let y = match scn.berkson {
            Some((alpha, phi)) => BerksonMap { alpha, phi }.apply(y),
            None => y,
        };
        T::lit(y)
    });
    let mut panel = PanelMatrix::from_values(values);
    for &i in &treated {
        panel.set_treated(i, start);
    }
    Ok(SimPanel { panel, drift })
}

/// Mean and Monte Carlo standard error.
fn summarize(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Point estimate used in the simulations: the mean effect over all treated
/// cells, which for DD on a balanced panel equals the TWFE coefficient.
fn pooled_estimate<T: Scalar>(est: &Estimator<T>, panel: &PanelMatrix<T>) -> Result<f64> {
    Ok(est.estimate(panel)?.effects.pooled.as_f64())
}

/// Re-seeds the estimator's internal cross-validation for one replicate.
fn for_replicate<T: Scalar>(est: &Estimator<T>, seed: u64) -> Estimator<T> {
    match est {
        Estimator::Mc(s) => {
            let mut s = s.clone();
            s.seed = seed;
            Estimator::Mc(s)
        }
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasPoint {
    pub t_periods: usize,
    pub rate: f64,
    pub estimator: String,
    pub bias: f64,
    pub mc_se: f64,
}

/// Bias of each estimator over a `(n_periods, rate)` grid under trend-correlated selection.
pub fn simulate_pretrend<T: Scalar>(
    scn: &SimScenario,
    periods: &[usize],
    rates: &[f64],
    reps: usize,
    estimators: &[Estimator<T>],
) -> Result<Vec<BiasPoint>> {
    if !scn.selection_correlated || scn.berkson.is_some() {
        return Err(Error::InvalidArgument(
            "pre-trend simulation needs correlated selection and no outcome map".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let mut cells = Vec::new();
    for &t in periods {
        for &rate in rates {
            cells.push((t, rate));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    let estimates: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (t, rate) = cells[c];
            let s = SimScenario { n_periods: t, pretrend_rate: rate, ..scn.clone() };
            let sim = generate_panel::<T>(&s, r as u64)?;
            estimators
                .iter()
                .map(|e| pooled_estimate(&for_replicate(e, crate::rng::derive_seed(scn.seed, &[r as u64, t as u64])), &sim.panel))
                .collect()
        })
        .collect();
    let estimates: Vec<Vec<f64>> = estimates.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (c, &(t, rate)) in cells.iter().enumerate() {
        for (k, e) in estimators.iter().enumerate() {
            let bias: Vec<f64> = (0..reps).map(|r| estimates[c * reps + r][k] - scn.effect).collect();
            let (bias, mc_se) = summarize(&bias);
            out.push(BiasPoint { t_periods: t, rate, estimator: e.name().to_string(), bias, mc_se });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerksonRow {
    pub estimator: String,
    pub alpha: f64,
    pub phi: f64,
    pub mean_estimate: f64,
    pub mc_se: f64,
    /// Mean estimate over the true effect.
    pub ratio: f64,
}

/// Effect estimates on clean panels after the outcome map `y' = alpha + phi·y`.
pub fn simulate_berkson<T: Scalar>(scn: &SimScenario, reps: usize, estimators: &[Estimator<T>]) -> Result<Vec<BerksonRow>> {
    let Some((alpha, phi)) = scn.berkson else {
        return Err(Error::InvalidArgument("Berkson simulation needs an outcome map".into()));
    };
    if scn.selection_correlated {
        return Err(Error::InvalidArgument("Berkson simulation assumes uncorrelated selection".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let estimates: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sim = generate_panel::<T>(scn, r as u64)?;
            estimators
                .iter()
                .map(|e| pooled_estimate(&for_replicate(e, crate::rng::derive_seed(scn.seed, &[r as u64])), &sim.panel))
                .collect()
        })
        .collect();
    let estimates: Vec<Vec<f64>> = estimates.into_iter().collect::<Result<_>>()?;
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let xs: Vec<f64> = estimates.iter().map(|v| v[k]).collect();
            let (mean, se) = summarize(&xs);
            BerksonRow {
                estimator: e.name().to_string(),
                alpha,
                phi,
                mean_estimate: mean,
                mc_se: se,
                ratio: mean / scn.effect,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionRates {
    pub reps: usize,
    pub reject_95: f64,
    pub reject_90: f64,
}

/// Rejection rates of the placebo pre-trend test, relabelling treated units
/// at the last pre-treatment period.
pub fn simulate_pretrend_rejection(scn: &SimScenario, reps: usize) -> Result<RejectionRates> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let placebo = scn.start_period() - 1;
    let flags: Vec<Result<(bool, bool)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sim = generate_panel::<f64>(scn, r as u64)?;
            let t = pretrend_test(&sim.panel, placebo)?;
            Ok((t.reject_95, t.reject_90))
        })
        .collect();
    let flags: Vec<(bool, bool)> = flags.into_iter().collect::<Result<_>>()?;
    let rate = |f: fn(&(bool, bool)) -> bool| flags.iter().filter(|x| f(x)).count() as f64 / reps as f64;
    Ok(RejectionRates { reps, reject_95: rate(|x| x.0), reject_90: rate(|x| x.1) })
}

/// Writes `t_periods,rate,estimator,bias,mc_se`.
pub fn write_bias_curves<W: std::io::Write>(out: W, points: &[BiasPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<bias curves>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_reproducible_and_shaped() {
        let scn = SimScenario { n_units: 30, n_periods: 8, seed: 5, ..Default::default() };
        let a = generate_panel::<f64>(&scn, 3).unwrap();
        let b = generate_panel::<f64>(&scn, 3).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.panel.treated_units().len(), 6);
        assert_eq!(a.panel.adoption_period().unwrap(), 4);
        let c = generate_panel::<f64>(&scn, 4).unwrap();
        assert_ne!(a.panel.values, c.panel.values);
    }

    #[test]
    fn rate_only_moves_drifting_units() {
        let base = SimScenario { n_units: 20, n_periods: 6, selection_correlated: true, ..Default::default() };
        let a = generate_panel::<f64>(&base, 0).unwrap();
        let b = generate_panel::<f64>(&SimScenario { pretrend_rate: 0.5, ..base }, 0).unwrap();
        assert_eq!(a.panel.treated_unit, b.panel.treated_unit);
        for i in 0..20 {
            for s in 0..6 {
                let d = b.panel.values[[i, s]] - a.panel.values[[i, s]];
                let want = if a.drift[i] { 0.5 * s as f64 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scenario_validation() {
        assert!(SimScenario { n_periods: 3, ..Default::default() }.validate().is_err());
        assert!(SimScenario { treat_share: 1.0, ..Default::default() }.validate().is_err());
        assert!(SimScenario { n_units: 2, treat_share: 0.1, ..Default::default() }.validate().is_err());
        assert!(SimScenario::default().validate().is_ok());
    }

    #[test]
    fn preconditions_are_enforced() {
        let est = [Estimator::<f64>::Dd];
        assert!(simulate_pretrend(&SimScenario::default(), &[8], &[0.1], 2, &est).is_err());
        assert!(simulate_berkson(&SimScenario::default(), 2, &est).is_err());
    }
}
