use std::fs::File;

use wealth_causal::wealth_index::{build_index, cluster_mean};
use wealth_causal::AssetTable;

use super::num;
use crate::config::IndexConfig;
use crate::{CliError, Output};

pub fn run(cfg: &IndexConfig, out: &Output) -> Result<(), CliError> {
    let Some(path) = cfg.input.as_deref() else {
        return Err(CliError::Config("no asset table given; set `input`".into()));
    };
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    let table = AssetTable::read_csv(file).map_err(|e| CliError::input(path, e))?;
    if let Some(bad) = cfg.exclude.iter().find(|c| !table.asset_names.contains(c)) {
        return Err(CliError::Config(format!("excluded column `{bad}` is not in {}", path.display())));
    }
    let exclude: Vec<&str> = cfg.exclude.iter().map(String::as_str).collect();
    let idx = build_index(&table, &exclude)?;

    out.table("household_index.csv", &["household_id", "cluster_id", "year", "wealth_index"], |w| {
        for (i, v) in idx.household.iter().enumerate() {
            w.write_record([
                table.household_ids[i].as_str(),
                table.cluster_ids[i].as_str(),
                &table.years[i].to_string(),
                &v.to_string(),
            ])?;
        }
        Ok(())
    })?;

    let keys: Vec<(String, i32)> = table.cluster_ids.iter().cloned().zip(table.years.iter().copied()).collect();
    let clusters = cluster_mean(idx.household.as_slice().expect("contiguous"), &keys)?;
    out.table("cluster_index.csv", &["cluster_id", "year", "wealth_index"], |w| {
        for ((id, year), v) in &clusters {
            w.write_record([id.as_str(), &year.to_string(), &v.to_string()])?;
        }
        Ok(())
    })?;

    out.table("loadings.csv", &["asset", "loading", "mean", "sd"], |w| {
        for ((name, l), (m, sd)) in idx.loadings.iter().zip(&idx.column_standardization) {
            w.write_record([name.as_str(), &l.to_string(), &num(Some(*m)), &num(Some(*sd))])?;
        }
        Ok(())
    })?;

    out.say(format!(
        "index: {} households, {} clusters, {} assets",
        table.household_ids.len(),
        clusters.len(),
        idx.loadings.len()
    ));
    Ok(())
}
