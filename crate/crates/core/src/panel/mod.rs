//! Outcome panels: the `N x T` substrate consumed by every estimator.

pub mod geo;
pub mod idw;
pub mod io;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `N` units by `T` periods of outcomes with observation and treatment masks.
///
/// Cells with `observed[[i, t]] == false` carry arbitrary values and are never
/// read by a consumer. A unit is treated from `first_treat_period[i]` onward.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMatrix<T> {
    pub values: Array2<T>,
    pub observed: Array2<bool>,
    pub treated_unit: Vec<bool>,
    pub first_treat_period: Vec<Option<usize>>,
    pub unit_ids: Vec<String>,
    pub period_labels: Vec<i32>,
}

impl<T: Scalar> PanelMatrix<T> {
    /// Builds an all-control panel.
    pub fn new(
        values: Array2<T>,
        observed: Array2<bool>,
        unit_ids: Vec<String>,
        period_labels: Vec<i32>,
    ) -> Result<Self> {
        let n = values.nrows();
        let panel = PanelMatrix {
            values,
            observed,
            treated_unit: vec![false; n],
            first_treat_period: vec![None; n],
            unit_ids,
            period_labels,
        };
        panel.validate()?;
        Ok(panel)
    }

    /// Fully observed all-control panel with generated labels `u0, u1, ...` and
    /// periods `0, 1, ...`.
    pub fn from_values(values: Array2<T>) -> Self {
        let (n, t) = values.dim();
        PanelMatrix {
            observed: Array2::from_elem((n, t), true),
            values,
            treated_unit: vec![false; n],
            first_treat_period: vec![None; n],
            unit_ids: (0..n).map(|i| format!("u{i}")).collect(),
            period_labels: (0..t as i32).collect(),
        }
    }

    pub fn n_units(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    /// Checks shapes and the treatment invariants.
    pub fn validate(&self) -> Result<()> {
        let (n, t) = self.values.dim();
        if self.observed.dim() != (n, t) {
            return Err(Error::LengthMismatch(format!(
                "observed mask is {:?}, values are {:?}",
                self.observed.dim(),
                (n, t)
            )));
        }
        if self.treated_unit.len() != n
            || self.first_treat_period.len() != n
            || self.unit_ids.len() != n
        {
            return Err(Error::LengthMismatch("per-unit vectors must have length N".into()));
        }
        if self.period_labels.len() != t {
            return Err(Error::LengthMismatch("period_labels must have length T".into()));
        }
        for i in 0..n {
            match (self.treated_unit[i], self.first_treat_period[i]) {
                (true, Some(p)) if p < t => {}
                (true, Some(p)) => {
                    return Err(Error::InvalidArgument(format!(
                        "unit {} first treated in period {p}, panel has {t} periods",
                        self.unit_ids[i]
                    )))
                }
                (false, None) => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unit {}: first_treat_period must be set exactly for treated units",
                        self.unit_ids[i]
                    )))
                }
            }
        }
        Ok(())
    }

    /// Marks unit `i` as treated from `period` onward.
    pub fn set_treated(&mut self, i: usize, period: usize) {
        self.treated_unit[i] = true;
        self.first_treat_period[i] = Some(period);
    }

    pub fn set_control(&mut self, i: usize) {
        self.treated_unit[i] = false;
        self.first_treat_period[i] = None;
    }

    /// Whether cell `(i, t)` is under treatment.
    #[inline]
    pub fn is_treated_cell(&self, i: usize, t: usize) -> bool {
        matches!(self.first_treat_period[i], Some(p) if t >= p)
    }

    /// Whether cell `(i, t)` is observed and untreated, i.e. usable to fit a
    /// model of untreated outcomes.
    #[inline]
    pub fn is_training_cell(&self, i: usize, t: usize) -> bool {
        self.observed[[i, t]] && !self.is_treated_cell(i, t)
    }

    pub fn treated_units(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.treated_unit[i]).collect()
    }

    pub fn control_units(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| !self.treated_unit[i]).collect()
    }

    /// The common adoption period of all treated units.
    ///
    /// Errors when no unit is treated or when treated units start in different
    /// periods.
    pub fn adoption_period(&self) -> Result<usize> {
        let mut starts: Vec<usize> = self.first_treat_period.iter().flatten().copied().collect();
        starts.sort_unstable();
        starts.dedup();
        match starts.as_slice() {
            [] => Err(Error::Degenerate("panel has no treated units".into())),
            [p] => Ok(*p),
            _ => Err(Error::StaggeredAdoption(starts)),
        }
    }

    /// Panel restricted to the given units, in the given order. Indices may repeat.
    pub fn select_units(&self, units: &[usize]) -> Self {
        let t = self.n_periods();
        let values = Array2::from_shape_fn((units.len(), t), |(r, c)| self.values[[units[r], c]]);
        let observed =
            Array2::from_shape_fn((units.len(), t), |(r, c)| self.observed[[units[r], c]]);
        PanelMatrix {
            values,
            observed,
            treated_unit: units.iter().map(|&i| self.treated_unit[i]).collect(),
            first_treat_period: units.iter().map(|&i| self.first_treat_period[i]).collect(),
            unit_ids: units.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            period_labels: self.period_labels.clone(),
        }
    }

    /// Panel restricted to periods `0..end`. Units whose treatment starts at or
    /// after `end` become controls of the truncated panel.
    pub fn truncate_periods(&self, end: usize) -> Self {
        let mut out = PanelMatrix {
            values: self.values.slice(ndarray::s![.., ..end]).to_owned(),
            observed: self.observed.slice(ndarray::s![.., ..end]).to_owned(),
            treated_unit: self.treated_unit.clone(),
            first_treat_period: self.first_treat_period.clone(),
            unit_ids: self.unit_ids.clone(),
            period_labels: self.period_labels[..end].to_vec(),
        };
        for i in 0..self.n_units() {
            if matches!(out.first_treat_period[i], Some(p) if p >= end) {
                out.set_control(i);
            }
        }
        out
    }

    /// Applies `f` to every observed value.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values)
            .and(&self.observed)
            .for_each(|v, &o| {
                if o {
                    *v = f(*v);
                }
            });
        out
    }

    /// Mean of observed values over `units` in period `t`; `None` if none observed.
    pub fn group_mean(&self, units: &[usize], t: usize) -> Option<T> {
        let vals: Vec<T> = units
            .iter()
            .filter(|&&i| self.observed[[i, t]])
            .map(|&i| self.values[[i, t]])
            .collect();
        crate::scalar::mean(&vals)
    }

    /// Counts of observed cells.
    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}
