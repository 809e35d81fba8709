//! Delimited-text ingestion and emission of outcome panels.
//!
//! Two layouts are accepted:
//!
//! * long: one row per observed unit-year, e.g. `unit_id,year,value`;
//!   absent rows are unobserved cells.
//! * wide: one row per unit, e.g. `unit_id,y2006,...,y2016`; empty fields are
//!   unobserved cells.
//!
//! Units keep their order of first appearance; periods are sorted ascending.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

/// Column mapping for [`load_panel`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PanelSchema {
    Long {
        unit: String,
        year: String,
        value: String,
    },
    /// Every column other than `unit` whose name is `year_prefix` followed by an
    /// integer is a period column.
    Wide { unit: String, year_prefix: String },
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema::Long {
            unit: "unit_id".into(),
            year: "year".into(),
            value: "value".into(),
        }
    }
}

impl PanelSchema {
    pub fn wide() -> Self {
        PanelSchema::Wide {
            unit: "unit_id".into(),
            year_prefix: "y".into(),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a panel from a comma-delimited file with a header row.
pub fn load_panel<T: Scalar>(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<PanelMatrix<T>> {
    read_panel(open(path.as_ref())?, schema)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_value<T: Scalar>(raw: &str, row: usize, column: &str) -> Result<T> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::lit)
        .ok_or_else(|| Error::NonNumeric {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

fn parse_year(raw: &str, row: usize, column: &str) -> Result<i32> {
    raw.trim().parse::<i32>().map_err(|_| Error::NonNumeric {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Reads a panel from any reader; see [`load_panel`].
pub fn read_panel<T: Scalar, R: Read>(reader: R, schema: &PanelSchema) -> Result<PanelMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty("panel file has no header".into()));
    }
    match schema {
        PanelSchema::Long { unit, year, value } => {
            let (ui, yi, vi) = (column(&headers, unit)?, column(&headers, year)?, column(&headers, value)?);
            let mut units: Vec<String> = Vec::new();
            let mut unit_index: HashMap<String, usize> = HashMap::new();
            let mut cells: Vec<(usize, i32, T)> = Vec::new();
            let mut seen: HashMap<(usize, i32), ()> = HashMap::new();
            for (k, rec) in rdr.records().enumerate() {
                let rec = rec?;
                // Header is line 1.
                let row = k + 2;
                let uid = rec.get(ui).unwrap_or("").trim().to_string();
                let yr = parse_year(rec.get(yi).unwrap_or(""), row, year)?;
                let v: T = parse_value(rec.get(vi).unwrap_or(""), row, value)?;
                let idx = *unit_index.entry(uid.clone()).or_insert_with(|| {
                    units.push(uid.clone());
                    units.len() - 1
                });
                if seen.insert((idx, yr), ()).is_some() {
                    return Err(Error::DuplicateCell { row, unit: uid, year: yr });
                }
                cells.push((idx, yr, v));
            }
            if cells.is_empty() {
                return Err(Error::Empty("panel file has no data rows".into()));
            }
            let years: Vec<i32> = cells.iter().map(|c| c.1).collect::<BTreeSet<_>>().into_iter().collect();
            let year_index: HashMap<i32, usize> = years.iter().enumerate().map(|(t, &y)| (y, t)).collect();
            let mut values = Array2::zeros((units.len(), years.len()));
            let mut observed = Array2::from_elem((units.len(), years.len()), false);
            for (i, y, v) in cells {
                let t = year_index[&y];
                values[[i, t]] = v;
                observed[[i, t]] = true;
            }
            PanelMatrix::new(values, observed, units, years)
        }
        PanelSchema::Wide { unit, year_prefix } => {
            let ui = column(&headers, unit)?;
            let mut period_cols: Vec<(i32, usize)> = headers
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != ui)
                .filter_map(|(c, h)| {
                    h.trim()
                        .strip_prefix(year_prefix.as_str())
                        .and_then(|y| y.parse::<i32>().ok())
                        .map(|y| (y, c))
                })
                .collect();
            if period_cols.is_empty() {
                return Err(Error::MissingColumn(format!("{year_prefix}<year>")));
            }
            period_cols.sort_unstable();
            let mut units = Vec::new();
            let mut seen = HashMap::new();
            let mut rows: Vec<Vec<Option<T>>> = Vec::new();
            for (k, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = k + 2;
                let uid = rec.get(ui).unwrap_or("").trim().to_string();
                let mut cells = Vec::with_capacity(period_cols.len());
                for &(y, c) in &period_cols {
                    let raw = rec.get(c).unwrap_or("");
                    if raw.trim().is_empty() {
                        cells.push(None);
                    } else {
                        cells.push(Some(parse_value(raw, row, &headers[c])?));
                    }
                    if seen.insert((uid.clone(), y), ()).is_some() {
                        return Err(Error::DuplicateCell { row, unit: uid, year: y });
                    }
                }
                units.push(uid);
                rows.push(cells);
            }
            if rows.is_empty() {
                return Err(Error::Empty("panel file has no data rows".into()));
            }
            let t = period_cols.len();
            let mut values = Array2::zeros((rows.len(), t));
            let mut observed = Array2::from_elem((rows.len(), t), false);
            for (i, cells) in rows.into_iter().enumerate() {
                for (c, v) in cells.into_iter().enumerate() {
                    if let Some(v) = v {
                        values[[i, c]] = v;
                        observed[[i, c]] = true;
                    }
                }
            }
            PanelMatrix::new(values, observed, units, period_cols.into_iter().map(|p| p.0).collect())
        }
    }
}

/// Writes observed cells in long layout (`unit_id,year,value`).
pub fn write_panel_long<T: Scalar, W: Write>(panel: &PanelMatrix<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit_id", "year", "value"])?;
    for i in 0..panel.n_units() {
        for t in 0..panel.n_periods() {
            if panel.observed[[i, t]] {
                w.write_record([
                    panel.unit_ids[i].clone(),
                    panel.period_labels[t].to_string(),
                    format!("{}", panel.values[[i, t]]),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("panel output", e))?;
    Ok(())
}

/// Reads a treatment file (`unit_id,first_treat_year`, empty year = control) and
/// applies it to `panel`. Units absent from the file stay controls.
pub fn apply_treatment_file<T: Scalar, R: Read>(panel: &mut PanelMatrix<T>, reader: R) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ui = column(&headers, "unit_id")?;
    let yi = column(&headers, "first_treat_year")?;
    let index: HashMap<&str, usize> = panel
        .unit_ids
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();
    let mut starts: Vec<(usize, Option<usize>)> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let uid = rec.get(ui).unwrap_or("").trim();
        let Some(&i) = index.get(uid) else {
            return Err(Error::InvalidArgument(format!("row {row}: unit `{uid}` is not in the panel")));
        };
        let raw = rec.get(yi).unwrap_or("").trim();
        if raw.is_empty() {
            starts.push((i, None));
            continue;
        }
        let year = parse_year(raw, row, "first_treat_year")?;
        let t = panel
            .period_labels
            .iter()
            .position(|&p| p >= year)
            .ok_or_else(|| Error::InvalidArgument(format!("row {row}: treatment year {year} is after the last period")))?;
        starts.push((i, Some(t)));
    }
    for (i, s) in starts {
        match s {
            Some(t) => panel.set_treated(i, t),
            None => panel.set_control(i),
        }
    }
    panel.validate()
}

/// Writes the treatment file read by [`apply_treatment_file`].
pub fn write_treatment<T: Scalar, W: Write>(panel: &PanelMatrix<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit_id", "first_treat_year"])?;
    for i in 0..panel.n_units() {
        let year = panel.first_treat_period[i]
            .map(|t| panel.period_labels[t].to_string())
            .unwrap_or_default();
        w.write_record([panel.unit_ids[i].as_str(), year.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("treatment output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn long(s: &str) -> Result<PanelMatrix<f64>> {
        read_panel(s.as_bytes(), &PanelSchema::default())
    }

    #[test]
    fn complete_two_by_two() {
        let p = long("unit_id,year,value\nu1,2010,1.0\nu1,2011,2.0\nu2,2010,3.0\nu2,2011,4.0\n").unwrap();
        assert_eq!(p.values, ndarray::array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(p.observed.iter().all(|&o| o));
        assert_eq!(p.period_labels, vec![2010, 2011]);
        assert_eq!(p.unit_ids, vec!["u1", "u2"]);
    }

    #[test]
    fn missing_row_is_unobserved() {
        let p = long("unit_id,year,value\nu1,2011,2.0\nu1,2010,1.0\nu2,2010,3.0\n").unwrap();
        assert_eq!(p.period_labels, vec![2010, 2011]);
        assert!(p.observed[[0, 0]] && p.observed[[0, 1]] && p.observed[[1, 0]]);
        assert!(!p.observed[[1, 1]]);
        assert_eq!(p.values[[0, 0]], 1.0);
    }

    #[test]
    fn duplicate_cell_rejected() {
        let e = long("unit_id,year,value\nu1,2010,1.0\nu1,2010,2.0\n").unwrap_err();
        assert!(matches!(e, Error::DuplicateCell { row: 3, year: 2010, .. }), "{e}");
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(long("unit_id,year\nu1,2010\n"), Err(Error::MissingColumn(c)) if c == "value"));
        assert!(matches!(long("unit_id,year,value\nu1,2010,abc\n"), Err(Error::NonNumeric { row: 2, .. })));
        assert!(matches!(long("unit_id,year,value\n"), Err(Error::Empty(_))));
        assert!(long("").is_err());
    }

    #[test]
    fn wide_layout_with_gaps() {
        let p: PanelMatrix<f64> = read_panel(
            "unit_id,y2007,y2006\na,1.5,\nb,2.5,3.5\n".as_bytes(),
            &PanelSchema::wide(),
        )
        .unwrap();
        assert_eq!(p.period_labels, vec![2006, 2007]);
        assert!(!p.observed[[0, 0]]);
        assert_eq!(p.values[[0, 1]], 1.5);
        assert_eq!(p.values[[1, 0]], 3.5);
    }

    #[test]
    fn treatment_file_applies() {
        let mut p = long("unit_id,year,value\na,2010,1\na,2011,1\nb,2010,1\nb,2011,1\n").unwrap();
        apply_treatment_file(&mut p, "unit_id,first_treat_year\na,2011\nb,\n".as_bytes()).unwrap();
        assert_eq!(p.first_treat_period, vec![Some(1), None]);
        let mut buf = Vec::new();
        write_treatment(&p, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "unit_id,first_treat_year\na,2011\nb,\n");
    }
}
