//! Inverse-distance-weighted imputation of unobserved unit-years from nearby
//! same-year observations.

use crate::error::{Error, Result};
use crate::panel::geo::haversine_km;
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct IdwObservation<T> {
    pub unit_id: String,
    pub year: i32,
    pub value: T,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdwTarget {
    pub unit_id: String,
    pub year: i32,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdwOutput<T> {
    /// `(unit_id, year, value)` for every target with at least one neighbour.
    pub imputed: Vec<(String, i32, T)>,
    /// Targets without a same-year observation inside the radius.
    pub dropped: Vec<(String, i32)>,
}

/// Parameters: search radius in km (10 km in the reference design) and the
/// distance exponent (1 by default).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdwParams {
    pub radius_km: f64,
    pub power: f64,
}

impl Default for IdwParams {
    fn default() -> Self {
        IdwParams {
            radius_km: 10.0,
            power: 1.0,
        }
    }
}

/// Imputes `Σ w_j v_j / Σ w_j` with `w_j = d_j^-power` over observations from the
/// target's year within `radius_km`. Coincident observations (distance zero)
/// are reproduced exactly; several coincident ones are averaged.
pub fn idw_impute<T: Scalar>(
    observations: &[IdwObservation<T>],
    targets: &[IdwTarget],
    params: IdwParams,
) -> Result<IdwOutput<T>> {
    if observations.is_empty() {
        return Err(Error::Empty("no observations to interpolate from".into()));
    }
    if targets.is_empty() {
        return Err(Error::Empty("no imputation targets".into()));
    }
    if !(params.radius_km > 0.0) || !(params.power > 0.0) {
        return Err(Error::InvalidArgument("radius and power must be positive".into()));
    }
    let mut out = IdwOutput {
        imputed: Vec::new(),
        dropped: Vec::new(),
    };
    for tgt in targets {
        let mut exact: Vec<T> = Vec::new();
        let mut num = T::zero();
        let mut den = T::zero();
        for obs in observations.iter().filter(|o| o.year == tgt.year) {
            let d = haversine_km((tgt.lon, tgt.lat), (obs.lon, obs.lat));
            if d > params.radius_km {
                continue;
            }
            if d == 0.0 {
                exact.push(obs.value);
            } else {
                let w = T::lit(d.powf(-params.power));
                num += w * obs.value;
                den += w;
            }
        }
        let value = if let Some(m) = crate::scalar::mean(&exact) {
            Some(m)
        } else if den > T::zero() {
            Some(num / den)
        } else {
            None
        };
        match value {
            Some(v) => out.imputed.push((tgt.unit_id.clone(), tgt.year, v)),
            None => out.dropped.push((tgt.unit_id.clone(), tgt.year)),
        }
    }
    Ok(out)
}

/// Fills every unobserved cell of `panel` by IDW over the observed cells of the
/// same period. Units with any cell that cannot be filled are dropped from the
/// returned panel; their ids are returned alongside.
///
/// `coords[i]` is the `(lon, lat)` of unit `i`.
pub fn idw_fill_panel<T: Scalar>(
    panel: &PanelMatrix<T>,
    coords: &[(f64, f64)],
    params: IdwParams,
) -> Result<(PanelMatrix<T>, Vec<String>)> {
    if coords.len() != panel.n_units() {
        return Err(Error::LengthMismatch("one coordinate pair per unit is required".into()));
    }
    let mut observations = Vec::new();
    let mut targets = Vec::new();
    for i in 0..panel.n_units() {
        for t in 0..panel.n_periods() {
            let (lon, lat) = coords[i];
            let key = format!("{i}");
            let year = panel.period_labels[t];
            if panel.observed[[i, t]] {
                observations.push(IdwObservation { unit_id: key, year, value: panel.values[[i, t]], lon, lat });
            } else {
                targets.push(IdwTarget { unit_id: key, year, lon, lat });
            }
        }
    }
    let mut filled = panel.clone();
    let mut drop = vec![false; panel.n_units()];
    if !targets.is_empty() {
        let out = idw_impute(&observations, &targets, params)?;
        let col = |year: i32| panel.period_labels.iter().position(|&y| y == year).unwrap();
        for (key, year, v) in out.imputed {
            let i: usize = key.parse().unwrap();
            let t = col(year);
            filled.values[[i, t]] = v;
            filled.observed[[i, t]] = true;
        }
        for (key, _) in out.dropped {
            drop[key.parse::<usize>().unwrap()] = true;
        }
    }
    let keep: Vec<usize> = (0..panel.n_units()).filter(|&i| !drop[i]).collect();
    let dropped = (0..panel.n_units()).filter(|&i| drop[i]).map(|i| panel.unit_ids[i].clone()).collect();
    Ok((filled.select_units(&keep), dropped))
}
