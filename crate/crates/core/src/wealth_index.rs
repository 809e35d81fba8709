//! Asset wealth index: first principal component of standardized household
//! asset responses, rescaled to mean 0 and standard deviation 1.

use std::collections::BTreeMap;
use std::io::Read;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::scalar::{mean, sample_sd, Scalar};

/// Household-by-asset response matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetTable<T> {
    pub household_ids: Vec<String>,
    pub cluster_ids: Vec<String>,
    pub years: Vec<i32>,
    pub asset_names: Vec<String>,
    /// `H x A` scores, binary ownership or ordinal quality.
    pub scores: Array2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WealthIndex<T> {
    /// Per-household index, mean 0 and standard deviation 1.
    pub household: Array1<T>,
    /// `(asset name, loading)` of the first principal direction.
    pub loadings: Vec<(String, T)>,
    /// Per-asset `(mean, sd)` used to standardize the columns.
    pub column_standardization: Vec<(T, T)>,
    /// `(mean, sd)` of the raw component scores before rescaling.
    pub score_standardization: (T, T),
}

impl<T: Scalar> AssetTable<T> {
    /// Reads `household_id,cluster_id,year,<asset columns...>`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let fixed = ["household_id", "cluster_id", "year"];
        for (k, name) in fixed.iter().enumerate() {
            if headers.get(k).map(str::trim) != Some(*name) {
                return Err(Error::MissingColumn((*name).into()));
            }
        }
        let asset_names: Vec<String> = headers.iter().skip(3).map(|h| h.trim().to_string()).collect();
        let a = asset_names.len();
        let (mut household_ids, mut cluster_ids, mut years, mut flat) = (vec![], vec![], vec![], vec![]);
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            household_ids.push(rec.get(0).unwrap_or("").trim().to_string());
            cluster_ids.push(rec.get(1).unwrap_or("").trim().to_string());
            let y = rec.get(2).unwrap_or("");
            years.push(y.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                column: "year".into(),
                value: y.into(),
            })?);
            for (c, name) in asset_names.iter().enumerate() {
                let raw = rec.get(c + 3).unwrap_or("");
                let v: f64 = raw.trim().parse().map_err(|_| Error::NonNumeric {
                    row,
                    column: name.clone(),
                    value: raw.into(),
                })?;
                flat.push(T::lit(v));
            }
        }
        if household_ids.is_empty() {
            return Err(Error::Empty("asset table has no rows".into()));
        }
        let scores = Array2::from_shape_vec((household_ids.len(), a), flat)
            .map_err(|e| Error::LengthMismatch(e.to_string()))?;
        Ok(AssetTable {
            household_ids,
            cluster_ids,
            years,
            asset_names,
            scores,
        })
    }
}

/// Builds the index from every asset column not named in `exclude`.
pub fn build_index<T: Scalar>(table: &AssetTable<T>, exclude: &[&str]) -> Result<WealthIndex<T>> {
    let keep: Vec<usize> = (0..table.asset_names.len())
        .filter(|&c| !exclude.contains(&table.asset_names[c].as_str()))
        .collect();
    let h = table.scores.nrows();
    if h < 2 {
        return Err(Error::Degenerate(format!("{h} households, need at least 2")));
    }
    if keep.len() < 2 {
        return Err(Error::Degenerate(format!("{} asset columns after exclusion, need at least 2", keep.len())));
    }
    let mut z = Array2::<T>::zeros((h, keep.len()));
    let mut column_standardization = Vec::with_capacity(keep.len());
    for (k, &c) in keep.iter().enumerate() {
        let col: Vec<T> = table.scores.column(c).to_vec();
        let m = mean(&col).unwrap();
        let sd = sample_sd(&col).unwrap();
        if !(sd > T::zero()) {
            return Err(Error::Degenerate(format!("asset `{}` has zero variance", table.asset_names[c])));
        }
        for (i, v) in col.into_iter().enumerate() {
            z[[i, k]] = (v - m) / sd;
        }
        column_standardization.push((m, sd));
    }

    let dec = svd(z.view());
    let mut direction: Array1<T> = dec.vt.row(0).to_owned();
    let mut scores = z.dot(&direction);

    // Orient so the index rises with the total of the standardized assets.
    let totals: Array1<T> = z.sum_axis(ndarray::Axis(1));
    if scores.dot(&totals) < T::zero() {
        direction.mapv_inplace(|x| -x);
        scores.mapv_inplace(|x| -x);
    }
    let raw: Vec<T> = scores.to_vec();
    let m = mean(&raw).unwrap();
    let sd = sample_sd(&raw).unwrap();
    if !(sd > T::zero()) {
        return Err(Error::Degenerate("first component has zero variance".into()));
    }
    let household = scores.mapv(|s| (s - m) / sd);
    Ok(WealthIndex {
        household,
        loadings: keep
            .iter()
            .zip(direction.iter())
            .map(|(&c, &l)| (table.asset_names[c].clone(), l))
            .collect(),
        column_standardization,
        score_standardization: (m, sd),
    })
}

/// Unweighted mean of `values` per key, ordered by key.
pub fn cluster_mean<T: Scalar, K: Ord + Clone>(values: &[T], keys: &[K]) -> Result<BTreeMap<K, T>> {
    if values.len() != keys.len() {
        return Err(Error::LengthMismatch(format!(
            "{} values but {} cluster labels",
            values.len(),
            keys.len()
        )));
    }
    let mut acc: BTreeMap<K, (T, usize)> = BTreeMap::new();
    for (v, k) in values.iter().zip(keys) {
        let e = acc.entry(k.clone()).or_insert((T::zero(), 0));
        e.0 += *v;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s / T::from_count(n))).collect())
}

/// Four interior cut points splitting a sample into quintiles.
///
/// Cuts are nearest-rank percentiles at 20/40/60/80. A value `v` belongs to
/// quintile `1 + #{cuts < v}`, so a value equal to a cut falls into the lower
/// quintile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuintileCuts<T>(pub [T; 4]);

impl<T: Scalar> QuintileCuts<T> {
    /// Zero-based quintile index in `0..5`.
    #[inline]
    pub fn quintile_of(&self, v: T) -> usize {
        self.0.iter().filter(|&&c| c < v).count()
    }
}

pub fn quintile_bounds<T: Scalar>(values: &[T]) -> Result<QuintileCuts<T>> {
    if values.len() < 5 {
        return Err(Error::Degenerate(format!("{} values, need at least 5 for quintiles", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("quintile input contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let cut = |k: usize| {
        // Nearest rank: ceil(k * n / 5), as a 1-based position.
        let rank = (k * n).div_ceil(5).max(1);
        sorted[rank - 1]
    };
    Ok(QuintileCuts([cut(1), cut(2), cut(3), cut(4)]))
}
