use std::collections::BTreeMap;

use wealth_causal::validation::{
    simulate_berkson, simulate_pretrend, simulate_pretrend_rejection, write_bias_curves, SimScenario,
};
use wealth_causal::Estimator;

use super::{build_estimator, EstimatorOptions};
use crate::config::{SimulateConfig, Study};
use crate::svg::{Mark, Plot, Series};
use crate::{CliError, Output};

fn scenario(cfg: &SimulateConfig, seed: u64) -> SimScenario {
    SimScenario {
        n_units: cfg.n_units,
        n_periods: cfg.periods.first().copied().unwrap_or(20),
        treat_share: cfg.treat_share,
        effect: cfg.effect,
        noise_sd: cfg.noise_sd,
        drift_share: cfg.drift_share,
        selection_strength: cfg.selection_strength,
        unit_sd: cfg.unit_sd,
        shock_sd: cfg.shock_sd,
        seed,
        ..Default::default()
    }
}

pub fn run(cfg: &SimulateConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    if cfg.periods.is_empty() || cfg.estimators.is_empty() {
        return Err(CliError::Config("`periods` and `estimators` must be non-empty".into()));
    }
    let options = EstimatorOptions { cv_reps: cfg.mc_cv_reps, ..EstimatorOptions::defaults(seed) };
    let estimators: Vec<Estimator> =
        cfg.estimators.iter().map(|&n| build_estimator(n, &options)).collect::<Result<_, _>>()?;
    let base = scenario(cfg, seed);

    if cfg.studies.contains(&Study::Pretrend) {
        let scn = SimScenario { selection_correlated: true, ..base.clone() };
        let points = simulate_pretrend(&scn, &cfg.periods, &cfg.rates, cfg.reps, &estimators)?;
        write_bias_curves(&mut out.file("bias_curves.csv")?, &points)?;
        let mut curves: BTreeMap<(usize, String), Vec<(f64, f64)>> = BTreeMap::new();
        for p in &points {
            curves.entry((p.t_periods, p.estimator.clone())).or_default().push((p.rate, p.bias));
        }
        let plot = Plot {
            title: "Bias under trend-correlated selection".into(),
            x_label: "pre-trend rate".into(),
            y_label: "mean bias".into(),
            series: curves
                .into_iter()
                .map(|((t, e), pts)| Series::new(format!("{e} T={t}"), Mark::Line, pts))
                .collect(),
        };
        out.text("bias_curves.svg", &plot.render())?;
        out.say(format!("pretrend: {} bias points", points.len()));
    }

    if cfg.studies.contains(&Study::Berkson) {
        let mut rows = Vec::new();
        for &phi in &cfg.berkson_phi {
            let scn = SimScenario { berkson: Some((cfg.berkson_alpha, phi)), ..base.clone() };
            rows.extend(simulate_berkson(&scn, cfg.reps, &estimators)?);
        }
        out.table("berkson.csv", &["estimator", "alpha", "phi", "mean_estimate", "mc_se", "ratio"], |w| {
            rows.iter().try_for_each(|r| {
                w.write_record([
                    r.estimator.clone(),
                    r.alpha.to_string(),
                    r.phi.to_string(),
                    r.mean_estimate.to_string(),
                    r.mc_se.to_string(),
                    r.ratio.to_string(),
                ])
            })
        })?;
        let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &rows {
            curves.entry(r.estimator.clone()).or_default().push((r.phi, r.mean_estimate));
        }
        let plot = Plot {
            title: "Effect estimates under a Berkson outcome map".into(),
            x_label: "slope phi".into(),
            y_label: "mean estimate".into(),
            series: curves.into_iter().map(|(e, pts)| Series::new(e, Mark::Line, pts)).collect(),
        };
        out.text("berkson.svg", &plot.render())?;
        out.say(format!("berkson: {} rows", rows.len()));
    }

    if cfg.studies.contains(&Study::Size) {
        let r = simulate_pretrend_rejection(&base, cfg.size_reps)?;
        out.table("pretrend_size.csv", &["reps", "reject_95", "reject_90"], |w| {
            w.write_record([r.reps.to_string(), r.reject_95.to_string(), r.reject_90.to_string()])
        })?;
        out.say(format!("pre-trend test size: {} at 95%, {} at 90%", r.reject_95, r.reject_90));
    }
    Ok(())
}
