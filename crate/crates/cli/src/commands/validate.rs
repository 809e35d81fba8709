use wealth_causal::estimators::pretrend_test;
use wealth_causal::validation::{kfold_control_cv, placebo_last_pretreat, PlaceboOptions};

use super::{build_estimator, load, EstimatorOptions, PanelInput};
use crate::config::ValidateConfig;
use crate::{CliError, Output};

pub fn run(cfg: &ValidateConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    if cfg.estimators.is_empty() {
        return Err(CliError::Config("`estimators` is empty".into()));
    }
    let input = PanelInput {
        panel: cfg.panel.as_deref(),
        format: cfg.format,
        treatment: cfg.treatment.as_deref(),
        splits: &[],
        demo: cfg.demo,
    };
    let (panel, _) = load(&input, out)?;
    let controls = panel.control_units();
    let options = EstimatorOptions::defaults(seed);

    let mut kfold_rows = Vec::new();
    let mut folds = Vec::new();
    let mut placebo_rows = Vec::new();
    for &name in &cfg.estimators {
        let est = build_estimator(name, &options)?;
        let r = kfold_control_cv(&panel, cfg.folds, &est, None)?;
        for (k, &s) in r.periods.iter().enumerate() {
            kfold_rows.push([
                name.as_str().to_string(),
                panel.period_labels[s].to_string(),
                r.mean_difference[k].to_string(),
                r.rmse_by_period[k].to_string(),
            ]);
        }
        folds = r.folds;
        let opts = PlaceboOptions { runs: cfg.placebo_runs, sample_fraction: cfg.sample_fraction, seed };
        let p = placebo_last_pretreat(&panel, &est, &opts)?;
        for (run, e) in p.run_errors.iter().enumerate() {
            placebo_rows.push([name.as_str().to_string(), run.to_string(), e.to_string()]);
        }
        out.say(format!("{}: k-fold rmse {}, placebo mean error {}", name.as_str(), r.rmse, p.mean_error));
    }
    out.table("kfold.csv", &["estimator", "year", "mean_difference", "rmse"], |w| {
        kfold_rows.iter().try_for_each(|r| w.write_record(r))
    })?;
    out.table("kfold_folds.csv", &["unit_id", "fold"], |w| {
        folds.iter().enumerate().try_for_each(|(k, f)| w.write_record([panel.unit_ids[controls[k]].clone(), f.to_string()]))
    })?;
    out.table("placebo.csv", &["estimator", "run", "error"], |w| placebo_rows.iter().try_for_each(|r| w.write_record(r)))?;

    let start = panel.adoption_period()?;
    let placebo = match cfg.placebo_year {
        Some(y) => panel
            .period_labels
            .iter()
            .position(|&p| p == y)
            .ok_or_else(|| CliError::Config(format!("placebo year {y} is not a panel year")))?,
        None => start.checked_sub(1).ok_or_else(|| CliError::Compute("no pre-treatment period".into()))?,
    };
    let t = pretrend_test(&panel, placebo)?;
    out.table("pretrend.csv", &["placebo_year", "beta", "se", "p_value", "reject_95", "reject_90"], |w| {
        w.write_record([
            panel.period_labels[placebo].to_string(),
            t.dd.beta.to_string(),
            t.dd.se.to_string(),
            t.dd.p_value.to_string(),
            t.reject_95.to_string(),
            t.reject_90.to_string(),
        ])
    })?;
    out.say(format!("pre-trend placebo at {}: beta {}, p {}", panel.period_labels[placebo], t.dd.beta, t.dd.p_value));
    Ok(())
}
