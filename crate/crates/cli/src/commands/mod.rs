pub mod assign;
pub mod estimate;
pub mod index;
pub mod simulate;
pub mod sweep;
pub mod validate;

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use wealth_causal::bootstrap::CountryScenario;
use wealth_causal::estimators::{EnetOptions, McOptions, McSettings, ScenMode, ScenSettings, Tuning};
use wealth_causal::panel::io::{apply_treatment_file, load_panel, write_panel_long, write_treatment, PanelSchema};
use wealth_causal::{Estimator, PanelMatrix, SplitEnsemble};

use crate::config::{EstimatorName, PanelFormat, ScenModeName};
use crate::{CliError, Output};

/// Size of the bundled demo: a small country with the reference study's
/// year span and effect ramp.
fn demo_scenario() -> CountryScenario {
    CountryScenario { n_control: 150, n_treated: 30, seed: 2016, ..Default::default() }
}

pub struct PanelInput<'a> {
    pub panel: Option<&'a Path>,
    pub format: PanelFormat,
    pub treatment: Option<&'a Path>,
    pub splits: &'a [PathBuf],
    pub demo: bool,
}

fn schema(format: PanelFormat) -> PanelSchema {
    match format {
        PanelFormat::Long => PanelSchema::default(),
        PanelFormat::Wide => PanelSchema::wide(),
    }
}

fn listed_units(path: &Path) -> Result<HashSet<String>, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| CliError::input(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "unit_id")
        .ok_or_else(|| CliError::input(path, "missing column `unit_id`"))?;
    let mut ids = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        ids.insert(rec.get(col).unwrap_or("").trim().to_string());
    }
    Ok(ids)
}

/// Loads the observed panel and its split ensemble. Demo data is written to
/// the output directory so the run can be repeated from files.
pub fn load(input: &PanelInput, out: &Output) -> Result<(PanelMatrix, SplitEnsemble), CliError> {
    if input.demo {
        if input.panel.is_some() {
            return Err(CliError::Config("give either `panel` or `demo`, not both".into()));
        }
        let (mut panel, ensemble) = demo_scenario().generate::<f64>()?;
        panel.values = ensemble.mean();
        let mut f = out.file("demo_panel.csv")?;
        write_panel_long(&panel, &mut f)?;
        let mut f = out.file("demo_treatment.csv")?;
        write_treatment(&panel, &mut f)?;
        return Ok((panel, ensemble));
    }
    let Some(path) = input.panel else {
        return Err(CliError::Config("no panel given; set `panel` or use `demo`".into()));
    };
    let Some(treatment) = input.treatment else {
        return Err(CliError::Config("a panel file needs a `treatment` file (unit_id,first_treat_year)".into()));
    };
    let sch = schema(input.format);
    let read = |p: &Path| -> Result<PanelMatrix, CliError> {
        let mut panel: PanelMatrix = load_panel(p, &sch).map_err(|e| CliError::input(p, e))?;
        let file = File::open(treatment).map_err(|e| CliError::input(treatment, e))?;
        apply_treatment_file(&mut panel, file).map_err(|e| CliError::input(treatment, e))?;
        let keep = listed_units(treatment)?;
        let rows: Vec<usize> = (0..panel.n_units()).filter(|&i| keep.contains(&panel.unit_ids[i])).collect();
        Ok(panel.select_units(&rows))
    };
    let panel = read(path)?;
    let mut splits = vec![panel.values.clone()];
    for p in input.splits {
        let s = read(p)?;
        if s.unit_ids != panel.unit_ids || s.period_labels != panel.period_labels {
            return Err(CliError::input(p, "split does not cover the same units and years as the panel"));
        }
        splits.push(s.values);
    }
    // With split files the panel itself is the first split.
    Ok((panel, SplitEnsemble::new(splits)?))
}

pub fn scen_mode(m: ScenModeName) -> ScenMode {
    match m {
        ScenModeName::Transposed => ScenMode::Transposed,
        ScenModeName::Standard => ScenMode::Standard,
    }
}

pub struct EstimatorOptions {
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub alpha: f64,
    pub scen_mode: ScenModeName,
    pub folds: usize,
    pub holdout_fraction: f64,
    pub cv_reps: usize,
    pub seed: u64,
}

impl EstimatorOptions {
    pub fn defaults(seed: u64) -> Self {
        let d = crate::config::EstimateConfig::default();
        EstimatorOptions {
            lambda: None,
            lambda_grid: Vec::new(),
            alpha: d.alpha,
            scen_mode: d.scen_mode,
            folds: d.folds,
            holdout_fraction: d.holdout_fraction,
            cv_reps: d.cv_reps,
            seed,
        }
    }
}

pub fn build_estimator(name: EstimatorName, o: &EstimatorOptions) -> Result<Estimator, CliError> {
    let tuning = match (o.lambda, o.lambda_grid.is_empty()) {
        (Some(_), false) => return Err(CliError::Config("set `lambda` or `lambda_grid`, not both".into())),
        (Some(l), true) => Tuning::Fixed(l),
        (None, _) => Tuning::Cv(o.lambda_grid.clone()),
    };
    Ok(match name {
        EstimatorName::Dd => Estimator::Dd,
        EstimatorName::Mc => Estimator::Mc(McSettings {
            lambda: tuning,
            options: McOptions::default(),
            holdout_fraction: o.holdout_fraction,
            cv_reps: o.cv_reps,
            seed: o.seed,
        }),
        EstimatorName::Scen => Estimator::Scen(ScenSettings {
            alpha: o.alpha,
            lambda: tuning,
            mode: scen_mode(o.scen_mode),
            folds: o.folds,
            options: EnetOptions::default(),
        }),
    })
}

/// Shortest round-trip text for a number; empty for a missing value.
pub fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
