use std::fs::File;

use wealth_causal::panel::geo::{assign_treatment, density_filter, read_geounits, read_grid_geojson, Group};

use crate::config::AssignConfig;
use crate::{CliError, Output};

pub fn run(cfg: &AssignConfig, out: &Output) -> Result<(), CliError> {
    let (Some(units_path), Some(grid_path)) = (cfg.units.as_deref(), cfg.grid.as_deref()) else {
        return Err(CliError::Config("set both `units` and `grid`".into()));
    };
    let units = read_geounits(File::open(units_path).map_err(|e| CliError::input(units_path, e))?)
        .map_err(|e| CliError::input(units_path, e))?;
    let grid = read_grid_geojson(File::open(grid_path).map_err(|e| CliError::input(grid_path, e))?)
        .map_err(|e| CliError::input(grid_path, e))?;
    let window = (cfg.treat_first_vintage, cfg.treat_last_vintage);
    let mut groups = assign_treatment(&units, &grid, cfg.treat_buffer_km, cfg.control_exclusion_km, window, cfg.study_end)?;
    if cfg.density_filter {
        groups = density_filter(&units, &groups, cfg.density_top_share);
    }

    let vintages: Vec<i32> = grid.vintages.keys().copied().collect();
    // First vintage inside the treatment window whose lines are within the buffer.
    let first_year = |a: &wealth_causal::panel::geo::TreatmentAssignment| {
        (a.group == Group::Treated)
            .then(|| {
                a.distance_km
                    .iter()
                    .find(|(y, d)| *y >= window.0 && *y <= window.1 && *d <= cfg.treat_buffer_km)
                    .map(|(y, _)| y.to_string())
            })
            .flatten()
            .unwrap_or_default()
    };
    let mut header = vec!["unit_id".to_string(), "group".into(), "first_treat_year".into()];
    header.extend(vintages.iter().map(|y| format!("dist_{y}_km")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.table("assignment.csv", &header, |w| {
        groups.iter().try_for_each(|a| {
            let mut row = vec![a.unit_id.clone(), a.group.as_str().to_string(), first_year(a)];
            row.extend(a.distance_km.iter().map(|(_, d)| d.to_string()));
            w.write_record(row)
        })
    })?;
    out.table("treatment.csv", &["unit_id", "first_treat_year"], |w| {
        groups.iter().filter(|a| a.group != Group::Excluded).try_for_each(|a| w.write_record([a.unit_id.clone(), first_year(a)]))
    })?;
    let count = |g: Group| groups.iter().filter(|a| a.group == g).count();
    out.say(format!(
        "assign: {} treated, {} control, {} excluded",
        count(Group::Treated),
        count(Group::Control),
        count(Group::Excluded)
    ));
    Ok(())
}
