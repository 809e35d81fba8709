use wealth_causal::bootstrap::{ate_timepath, bootstrap_ate, write_draws, write_summary, BootstrapConfig};
use wealth_causal::estimators::{dd_two_unit, write_effects};
use wealth_causal::{EstimatorResult, PanelMatrix};

use super::{build_estimator, load, num, EstimatorOptions, PanelInput};
use crate::config::{EstimateConfig, EstimateMode, EstimatorName};
use crate::svg::{Mark, Plot, Series};
use crate::{CliError, Output};

pub fn run(cfg: &EstimateConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    let input = PanelInput {
        panel: cfg.panel.as_deref(),
        format: cfg.format,
        treatment: cfg.treatment.as_deref(),
        splits: &cfg.splits,
        demo: cfg.demo,
    };
    if cfg.mode == EstimateMode::TwoUnit && cfg.estimator != EstimatorName::Dd {
        return Err(CliError::Config("two-unit mode is only defined for the dd estimator".into()));
    }
    let (panel, ensemble) = load(&input, out)?;
    if cfg.mode == EstimateMode::TwoUnit {
        return two_unit(&panel, out);
    }

    let options = EstimatorOptions {
        lambda: cfg.lambda,
        lambda_grid: cfg.lambda_grid.clone(),
        alpha: cfg.alpha,
        scen_mode: cfg.scen_mode,
        folds: cfg.folds,
        holdout_fraction: cfg.holdout_fraction,
        cv_reps: cfg.cv_reps,
        seed,
    };
    let estimator = build_estimator(cfg.estimator, &options)?;
    let result = estimator.estimate(&panel)?;

    write_effects(&mut out.file("effects.csv")?, &panel, &result.effects)?;
    if let Some(cv) = &result.cv {
        out.table("cv_trace.csv", &["lambda", "score"], |w| {
            for (l, s) in &cv.scores {
                w.write_record([l.to_string(), s.to_string()])?;
            }
            Ok(())
        })?;
    }
    series(&panel, &result, out)?;

    let start = panel.adoption_period()?;
    let last = panel.n_periods() - 1;
    let headline = format!(
        "{}: ATE {} = {}{}",
        result.estimator,
        panel.period_labels[last],
        num(result.effects.period_ate(last)),
        result.lambda.map(|l| format!(" (lambda {l})")).unwrap_or_default()
    );

    if cfg.bootstrap_reps == 0 {
        out.say(headline);
        return Ok(());
    }
    let bcfg = BootstrapConfig {
        reps: cfg.bootstrap_reps,
        seed,
        resample: cfg.resample,
        retry_cap: cfg.retry_cap,
        ..Default::default()
    };
    let summary = bootstrap_ate(&ensemble, &panel, &estimator, &bcfg)?;
    write_draws(&mut out.file("draws.csv")?, &summary)?;
    write_summary(&mut out.file("summary.csv")?, &summary)?;
    out.table("timepath.csv", &["offset", "year", "mean", "lo95", "hi95"], |w| {
        for r in ate_timepath(&summary) {
            w.write_record([r.offset.to_string(), r.year.to_string(), r.mean.to_string(), r.lo.to_string(), r.hi.to_string()])?;
        }
        Ok(())
    })?;
    let (m, lo, hi) = summary.headline();
    out.say(format!(
        "{headline}; bootstrap mean {m} [{lo}, {hi}] over {} reps from {} post years after {}",
        summary.reps,
        summary.periods.len(),
        panel.period_labels[start]
    ));
    Ok(())
}

/// Per-year treated mean, control mean and the mean counterfactual of the
/// treated units, as CSV and as a line chart.
fn series(panel: &PanelMatrix, result: &EstimatorResult, out: &Output) -> Result<(), CliError> {
    let treated = panel.treated_units();
    let controls = panel.control_units();
    let cf = &result.counterfactual;
    let rows: Vec<(i32, Option<f64>, Option<f64>, Option<f64>)> = (0..panel.n_periods())
        .map(|t| {
            let vals: Vec<f64> = treated.iter().filter(|&&i| cf.defined[[i, t]]).map(|&i| cf.values[[i, t]]).collect();
            let cf_mean = (vals.len() == treated.len()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            (panel.period_labels[t], panel.group_mean(&treated, t), panel.group_mean(&controls, t), cf_mean)
        })
        .collect();
    out.table("series.csv", &["year", "treated_mean", "control_mean", "counterfactual_mean"], |w| {
        for (y, a, b, c) in &rows {
            w.write_record([y.to_string(), num(*a), num(*b), num(*c)])?;
        }
        Ok(())
    })?;
    let pick = |f: fn(&(i32, Option<f64>, Option<f64>, Option<f64>)) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| f(r).map(|v| (f64::from(r.0), v))).collect()
    };
    let plot = Plot {
        title: format!("Treated, control and {} counterfactual means", result.estimator),
        x_label: "year".into(),
        y_label: "mean outcome".into(),
        series: vec![
            Series::new("treated", Mark::Line, pick(|r| r.1)),
            Series::new("control", Mark::Line, pick(|r| r.2)),
            Series::new("counterfactual", Mark::Dashed, pick(|r| r.3)),
        ],
    };
    out.text("counterfactual.svg", &plot.render())
}

fn two_unit(panel: &PanelMatrix, out: &Output) -> Result<(), CliError> {
    let start = panel.adoption_period()?;
    let avg = |units: &[usize], periods: std::ops::Range<usize>| -> Result<f64, CliError> {
        let means: Vec<f64> = periods.filter_map(|t| panel.group_mean(units, t)).collect();
        if means.is_empty() {
            return Err(CliError::Compute("a group has no observed cell before or after adoption".into()));
        }
        Ok(means.iter().sum::<f64>() / means.len() as f64)
    };
    let (treated, controls) = (panel.treated_units(), panel.control_units());
    let t = panel.n_periods();
    let (t0, t1) = (avg(&treated, 0..start)?, avg(&treated, start..t)?);
    let (c0, c1) = (avg(&controls, 0..start)?, avg(&controls, start..t)?);
    let beta = dd_two_unit(t0, t1, c0, c1);
    out.table("two_unit.csv", &["treated_pre", "treated_post", "control_pre", "control_post", "beta"], |w| {
        w.write_record([t0, t1, c0, c1, beta].map(|v| v.to_string()))
    })?;
    out.say(format!("beta = {beta}"));
    Ok(())
}
