use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use wealth_causal::bias_loss::{heteroscedastic_task, select_lambda_b, slope_diagnostic, train_surrogate, Architecture, LossConfig};

use crate::config::{ArchitectureName, SweepConfig};
use crate::svg::{Mark, Plot, Series};
use crate::{CliError, Output};

/// Reads a feature table whose `label` column is the target and every other
/// column a numeric feature.
fn read_features(path: &Path) -> Result<(Array2<f64>, Vec<f64>), CliError> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| CliError::input(path, e))?.clone();
    let label = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| CliError::input(path, "missing column `label`"))?;
    let d = headers.len() - 1;
    let (mut flat, mut labels) = (Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        for (c, raw) in rec.iter().enumerate() {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| CliError::input(path, format!("row {}: non-numeric value `{raw}` in column `{}`", k + 2, &headers[c])))?;
            if c == label {
                labels.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::input(path, "no rows"));
    }
    let x = Array2::from_shape_vec((labels.len(), d), flat).map_err(|e| CliError::input(path, e))?;
    Ok((x, labels))
}

fn data(cfg: &SweepConfig) -> Result<((Array2<f64>, Vec<f64>), (Array2<f64>, Vec<f64>)), CliError> {
    match (&cfg.train, &cfg.validation) {
        (Some(t), Some(v)) => Ok((read_features(t)?, read_features(v)?)),
        (None, None) => Ok((
            heteroscedastic_task(cfg.train_n, cfg.data_seed),
            heteroscedastic_task(cfg.validation_n, cfg.data_seed + 1),
        )),
        _ => Err(CliError::Config("set both `train` and `validation`, or neither".into())),
    }
}

pub fn run(cfg: &SweepConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    if cfg.lambda_b.is_empty() {
        return Err(CliError::Config("`lambda_b` is empty".into()));
    }
    let ((x, y), (xv, yv)) = data(cfg)?;
    if x.ncols() != xv.ncols() {
        return Err(CliError::Config(format!("{} training features but {} validation features", x.ncols(), xv.ncols())));
    }
    let arch = match cfg.architecture {
        ArchitectureName::Linear => Architecture::Linear,
        ArchitectureName::Mlp => Architecture::Mlp { hidden: cfg.hidden },
    };
    let base = LossConfig {
        lambda_r: cfg.lambda_r,
        lambda_b: 0.0,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        decay: cfg.decay,
        epochs: cfg.epochs,
        seed,
    };

    let mut points = Vec::new();
    let mut status = Vec::new();
    for (k, &lambda_b) in cfg.lambda_b.iter().enumerate() {
        let lc = LossConfig { lambda_b, ..base.clone() };
        let model = match train_surrogate(x.view(), &y, &lc, arch) {
            Ok(m) => m,
            Err(e @ wealth_causal::Error::Diverged { .. }) => {
                eprintln!("lambda_b {lambda_b}: {e}");
                status.push([lambda_b.to_string(), "diverged".into(), e.to_string()]);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (phi, r2) = slope_diagnostic(&model.predict(xv.view()), &yv)?;
        out.table(&format!("history_{k}.csv"), &["epoch", "mse", "l2", "eb", "total"], |w| {
            model.history.iter().try_for_each(|h| {
                w.write_record([h.epoch.to_string(), h.loss.mse.to_string(), h.loss.l2.to_string(), h.loss.eb.to_string(), h.loss.total.to_string()])
            })
        })?;
        out.table(&format!("params_{k}.csv"), &["index", "value"], |w| {
            model.params.flatten().iter().enumerate().try_for_each(|(i, v)| w.write_record([i.to_string(), v.to_string()]))
        })?;
        status.push([lambda_b.to_string(), "ok".into(), String::new()]);
        points.push(wealth_causal::bias_loss::SweepPoint { lambda_b, phi, r2, model });
    }
    if points.is_empty() {
        return Err(CliError::Compute("training diverged at every lambda_b".into()));
    }
    out.table("sweep.csv", &["lambda_b", "phi", "r2"], |w| {
        points.iter().try_for_each(|p| w.write_record([p.lambda_b.to_string(), p.phi.to_string(), p.r2.to_string()]))
    })?;
    out.table("sweep_status.csv", &["lambda_b", "status", "detail"], |w| status.iter().try_for_each(|r| w.write_record(r)))?;
    let mut series = Series::new("validation", Mark::Dots, points.iter().map(|p| (p.r2, p.phi)).collect());
    series.labels = points.iter().map(|p| format!("lambda_b={}", p.lambda_b)).collect();
    let plot = Plot {
        title: "Slope against r2 across the bias penalty".into(),
        x_label: "r2".into(),
        y_label: "slope phi".into(),
        series: vec![series],
    };
    out.text("sweep.svg", &plot.render())?;
    for p in &points {
        out.say(format!("lambda_b {}: phi {}, r2 {}", p.lambda_b, p.phi, p.r2));
    }
    if let Some(best) = select_lambda_b(&points) {
        out.say(format!("slope closest to one at lambda_b {best}"));
    }
    Ok(())
}
