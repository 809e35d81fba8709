//! Buffer-based treatment assignment against a grid network with vintages.
//!
//! Distances are great-circle distances on a spherical Earth from a point to
//! the nearest polyline segment.

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Mean Earth radius in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, PartialEq)]
pub struct GeoUnit {
    pub unit_id: String,
    pub lon: f64,
    pub lat: f64,
    /// Persons per km².
    pub population_density: Option<f64>,
}

/// Lines grouped by the year they appear in the network.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridNetwork {
    /// Vintage year -> polylines of `(lon, lat)` vertices.
    pub vintages: BTreeMap<i32, Vec<Vec<(f64, f64)>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Treated,
    Control,
    Excluded,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Treated => "treated",
            Group::Control => "control",
            Group::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentAssignment {
    pub unit_id: String,
    pub group: Group,
    /// Distance (km) to the nearest segment of each vintage, ascending by year.
    pub distance_km: Vec<(i32, f64)>,
}

impl GridNetwork {
    pub fn add_line(&mut self, vintage: i32, line: Vec<(f64, f64)>) -> Result<()> {
        if line.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "polyline in vintage {vintage} has {} vertices, need at least 2",
                line.len()
            )));
        }
        if line.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite vertex in vintage {vintage}")));
        }
        self.vintages.entry(vintage).or_default().push(line);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.vintages.values().all(|v| v.is_empty())
    }
}

fn to_unit_vector(lon: f64, lat: f64) -> [f64; 3] {
    let (lo, la) = (lon.to_radians(), lat.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    // atan2 form stays accurate for both tiny and near-antipodal separations.
    let c = cross(a, b);
    dot(c, c).sqrt().atan2(dot(a, b))
}

/// Haversine great-circle distance in km between two `(lon, lat)` points.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lat2) = (a.1.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.0 - a.0).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Great-circle distance (km) from point `p` to the minor arc `a`-`b`.
pub fn point_segment_km(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (pv, av, bv) = (to_unit_vector(p.0, p.1), to_unit_vector(a.0, a.1), to_unit_vector(b.0, b.1));
    let endpoint = angle_between(pv, av).min(angle_between(pv, bv));
    let n = cross(av, bv);
    let nn = dot(n, n).sqrt();
    if nn < 1e-15 {
        return EARTH_RADIUS_KM * endpoint;
    }
    let n = [n[0] / nn, n[1] / nn, n[2] / nn];
    let off = dot(pv, n);
    // Foot of the perpendicular on the great circle through a and b.
    let foot = [pv[0] - off * n[0], pv[1] - off * n[1], pv[2] - off * n[2]];
    let within = dot(cross(av, foot), n) >= 0.0 && dot(cross(foot, bv), n) >= 0.0;
    if within {
        EARTH_RADIUS_KM * off.clamp(-1.0, 1.0).asin().abs().min(endpoint)
    } else {
        EARTH_RADIUS_KM * endpoint
    }
}

fn distance_to_lines(p: (f64, f64), lines: &[Vec<(f64, f64)>]) -> f64 {
    lines
        .iter()
        .flat_map(|l| l.windows(2))
        .map(|s| point_segment_km(p, s[0], s[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Classifies units as treated, control, or excluded.
///
/// A unit is treated when it lies within `treat_buffer_km` of a line from a
/// vintage inside `treat_vintages` (inclusive) and farther than `treat_buffer_km`
/// from every earlier line. It is a control when it lies farther than
/// `control_exclusion_km` from every line up to `study_end`. Everything else is
/// excluded.
pub fn assign_treatment(
    units: &[GeoUnit],
    grid: &GridNetwork,
    treat_buffer_km: f64,
    control_exclusion_km: f64,
    treat_vintages: (i32, i32),
    study_end: i32,
) -> Result<Vec<TreatmentAssignment>> {
    if grid.is_empty() {
        return Err(Error::Empty("grid network has no lines".into()));
    }
    if !(treat_buffer_km > 0.0) {
        return Err(Error::InvalidArgument("treat_buffer_km must be positive".into()));
    }
    if !(control_exclusion_km >= treat_buffer_km) {
        return Err(Error::InvalidArgument(
            "control_exclusion_km must be at least treat_buffer_km".into(),
        ));
    }
    if treat_vintages.0 > treat_vintages.1 {
        return Err(Error::InvalidArgument("treatment vintage range is reversed".into()));
    }
    if let Some(u) = units.iter().find(|u| !u.lon.is_finite() || !u.lat.is_finite()) {
        return Err(Error::InvalidArgument(format!("unit {} has non-finite coordinates", u.unit_id)));
    }

    let out = units
        .par_iter()
        .map(|u| {
            let p = (u.lon, u.lat);
            let distance_km: Vec<(i32, f64)> = grid
                .vintages
                .iter()
                .map(|(&year, lines)| (year, distance_to_lines(p, lines)))
                .collect();
            let min_over = |pred: &dyn Fn(i32) -> bool| {
                distance_km
                    .iter()
                    .filter(|(y, _)| pred(*y))
                    .map(|&(_, d)| d)
                    .fold(f64::INFINITY, f64::min)
            };
            let d_pre = min_over(&|y| y < treat_vintages.0);
            let d_new = min_over(&|y| y >= treat_vintages.0 && y <= treat_vintages.1);
            let d_all = min_over(&|y| y <= study_end);
            let group = if d_new <= treat_buffer_km && d_pre > treat_buffer_km {
                Group::Treated
            } else if d_all > control_exclusion_km {
                Group::Control
            } else {
                Group::Excluded
            };
            TreatmentAssignment {
                unit_id: u.unit_id.clone(),
                group,
                distance_km,
            }
        })
        .collect();
    Ok(out)
}

/// Drops units with zero density, then drops the densest `top_treated_share`
/// of treated units. Units without a density value are kept.
pub fn density_filter(
    units: &[GeoUnit],
    assignments: &[TreatmentAssignment],
    top_treated_share: f64,
) -> Vec<TreatmentAssignment> {
    let density: BTreeMap<&str, Option<f64>> = units
        .iter()
        .map(|u| (u.unit_id.as_str(), u.population_density))
        .collect();
    let dens = |a: &TreatmentAssignment| density.get(a.unit_id.as_str()).copied().flatten();
    let kept: Vec<&TreatmentAssignment> = assignments.iter().filter(|a| dens(a) != Some(0.0)).collect();

    let mut treated: Vec<(f64, &str)> = kept
        .iter()
        .filter(|a| a.group == Group::Treated)
        .filter_map(|a| dens(a).map(|d| (d, a.unit_id.as_str())))
        .collect();
    treated.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
    let n_drop = (top_treated_share * treated.len() as f64).floor() as usize;
    let dropped: Vec<&str> = treated.iter().take(n_drop).map(|t| t.1).collect();
    kept.into_iter()
        .filter(|a| !(a.group == Group::Treated && dropped.contains(&a.unit_id.as_str())))
        .cloned()
        .collect()
}

/// Reads `unit_id,lon,lat[,density]`.
pub fn read_geounits<R: Read>(reader: R) -> Result<Vec<GeoUnit>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (ui, xi, yi) = (col("unit_id")?, col("lon")?, col("lat")?);
    let di = headers.iter().position(|h| h.trim() == "density");
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let num = |c: usize, name: &str| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: name.into(),
                value: raw.into(),
            })
        };
        let population_density = match di {
            Some(c) if !rec.get(c).unwrap_or("").trim().is_empty() => {
                let d = num(c, "density")?;
                if !(d >= 0.0) {
                    return Err(Error::InvalidArgument(format!("row {row}: density must be non-negative")));
                }
                Some(d)
            }
            _ => None,
        };
        out.push(GeoUnit {
            unit_id: rec.get(ui).unwrap_or("").trim().to_string(),
            lon: num(xi, "lon")?,
            lat: num(yi, "lat")?,
            population_density,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("unit file has no rows".into()));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct FeatureCollection {
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    geometry: Geometry,
    properties: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(tag = "type", content = "coordinates")]
enum Geometry {
    LineString(Vec<Vec<f64>>),
    MultiLineString(Vec<Vec<Vec<f64>>>),
}

/// Reads a GeoJSON feature collection of `LineString`/`MultiLineString`
/// features, each carrying an integer `vintage` property.
pub fn read_grid_geojson<R: Read>(reader: R) -> Result<GridNetwork> {
    let fc: FeatureCollection =
        serde_json::from_reader(reader).map_err(|e| Error::GeoJson(e.to_string()))?;
    let mut grid = GridNetwork::default();
    for (k, f) in fc.features.into_iter().enumerate() {
        let vintage = f
            .properties
            .get("vintage")
            .and_then(|v| v.as_i64().or_else(|| v.as_str().and_then(|s| s.parse().ok())))
            .ok_or_else(|| Error::GeoJson(format!("feature {k} lacks an integer `vintage`")))?
            as i32;
        let lines = match f.geometry {
            Geometry::LineString(l) => vec![l],
            Geometry::MultiLineString(ls) => ls,
        };
        for l in lines {
            let pts = l
                .into_iter()
                .map(|c| match c.as_slice() {
                    [x, y, ..] => Ok((*x, *y)),
                    _ => Err(Error::GeoJson(format!("feature {k}: coordinate needs two values"))),
                })
                .collect::<Result<Vec<_>>>()?;
            grid.add_line(vintage, pts)?;
        }
    }
    Ok(grid)
}
