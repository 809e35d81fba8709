//! Treatment effects from an estimated counterfactual matrix.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

/// Untreated outcomes predicted by an estimator. Only cells with
/// `defined[[i, t]]` carry a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual<T> {
    pub values: Array2<T>,
    pub defined: Array2<bool>,
}

impl<T: Scalar> Counterfactual<T> {
    /// A counterfactual defined everywhere.
    pub fn full(values: Array2<T>) -> Self {
        let defined = Array2::from_elem(values.dim(), true);
        Counterfactual { values, defined }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEffect<T> {
    pub unit: usize,
    pub period: usize,
    pub observed: T,
    pub counterfactual: T,
    pub effect: T,
}

/// Effects on the treated.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable<T> {
    pub cells: Vec<CellEffect<T>>,
    /// `(period index, mean effect over treated units)` for every treated period
    /// with at least one observed treated cell.
    pub per_period: Vec<(usize, T)>,
    /// Effect in the final treated period.
    pub ate: T,
    /// Mean effect over all treated cells.
    pub pooled: T,
}

impl<T: Scalar> EffectTable<T> {
    pub fn period_ate(&self, period: usize) -> Option<T> {
        self.per_period.iter().find(|(p, _)| *p == period).map(|(_, v)| *v)
    }
}

/// Observed minus counterfactual on every observed treated cell.
pub fn effects_from_counterfactual<T: Scalar>(
    panel: &PanelMatrix<T>,
    cf: &Counterfactual<T>,
) -> Result<EffectTable<T>> {
    if cf.values.dim() != panel.values.dim() || cf.defined.dim() != panel.values.dim() {
        return Err(Error::LengthMismatch(format!(
            "counterfactual is {:?}, panel is {:?}",
            cf.values.dim(),
            panel.values.dim()
        )));
    }
    let (n, t) = panel.values.dim();
    let mut cells = Vec::new();
    let mut sums = vec![T::zero(); t];
    let mut counts = vec![0usize; t];
    for i in 0..n {
        for s in 0..t {
            if !(panel.observed[[i, s]] && panel.is_treated_cell(i, s)) {
                continue;
            }
            if !cf.defined[[i, s]] {
                return Err(Error::MissingCounterfactual { unit: i, period: s });
            }
            let observed = panel.values[[i, s]];
            let counterfactual = cf.values[[i, s]];
            let effect = observed - counterfactual;
            sums[s] += effect;
            counts[s] += 1;
            cells.push(CellEffect { unit: i, period: s, observed, counterfactual, effect });
        }
    }
    if cells.is_empty() {
        return Err(Error::Degenerate("no observed treated cells".into()));
    }
    let per_period: Vec<(usize, T)> = (0..t)
        .filter(|&s| counts[s] > 0)
        .map(|s| (s, sums[s] / T::from_count(counts[s])))
        .collect();
    let ate = per_period.last().unwrap().1;
    let pooled = cells.iter().map(|c| c.effect).sum::<T>() / T::from_count(cells.len());
    Ok(EffectTable { cells, per_period, ate, pooled })
}

/// Writes `unit_id,year,observed,counterfactual,effect`.
pub fn write_effects<T: Scalar, W: Write>(
    out: W,
    panel: &PanelMatrix<T>,
    table: &EffectTable<T>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "year", "observed", "counterfactual", "effect"])?;
    for c in &table.cells {
        w.write_record([
            panel.unit_ids[c.unit].clone(),
            panel.period_labels[c.period].to_string(),
            c.observed.as_f64().to_string(),
            c.counterfactual.as_f64().to_string(),
            c.effect.as_f64().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<effects>", e))?;
    Ok(())
}
