//! Difference-in-differences: the two-group formula, two-way fixed effects
//! regression, the parallel-trends placebo test, and the imputation
//! counterfactual used when DD has to predict cells.

use ndarray::Array2;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::effects::Counterfactual;
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::panel::PanelMatrix;
use crate::scalar::Scalar;

/// Two-way fixed effects regression output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdResult<T> {
    pub beta: T,
    /// Homoskedastic standard error; infinite when no residual degrees of freedom remain.
    pub se: T,
    pub p_value: T,
    pub n_obs: usize,
    pub df: usize,
}

/// `(T1 - T0) - (C1 - C0)` from group means before and after treatment.
pub fn dd_two_unit<T: Scalar>(t0: T, t1: T, c0: T, c1: T) -> T {
    (t1 - t0) - (c1 - c0)
}

/// Least squares fit of `y = u_i + v_t + x_it' b` over the cells where `use_cell`
/// holds, with unit effects absorbed by within-unit demeaning. `v_0` is the
/// omitted period. Returns coefficients `[b, v_1 .. v_{T-1}]`, residual sum of
/// squares, observation count, units used and the factorization.
struct Absorbed<T> {
    coef: Vec<T>,
    rss: T,
    n_obs: usize,
    n_units: usize,
    lu: Lu<T>,
}

fn fit_absorbed<T: Scalar>(
    panel: &PanelMatrix<T>,
    use_cell: impl Fn(usize, usize) -> bool,
    regressors: &[&dyn Fn(usize, usize) -> T],
) -> Result<Absorbed<T>> {
    let (n, t) = panel.values.dim();
    let k = regressors.len();
    let p = k + t - 1;
    let mut xtx = Array2::<T>::zeros((p, p));
    let mut xty = vec![T::zero(); p];
    let mut n_obs = 0;
    let mut n_units = 0;
    let mut rows: Vec<(Vec<T>, T)> = Vec::new();
    let mut x = vec![T::zero(); p];
    let mut xbar = vec![T::zero(); p];

    for i in 0..n {
        let cells: Vec<usize> = (0..t).filter(|&s| use_cell(i, s)).collect();
        if cells.is_empty() {
            continue;
        }
        n_units += 1;
        n_obs += cells.len();
        let w = T::one() / T::from_count(cells.len());
        xbar.iter_mut().for_each(|v| *v = T::zero());
        let mut ybar = T::zero();
        for &s in &cells {
            fill_row(&mut x, i, s, regressors);
            for (b, &v) in xbar.iter_mut().zip(&x) {
                *b += v * w;
            }
            ybar += panel.values[[i, s]] * w;
        }
        for &s in &cells {
            fill_row(&mut x, i, s, regressors);
            for (v, &b) in x.iter_mut().zip(&xbar) {
                *v -= b;
            }
            let y = panel.values[[i, s]] - ybar;
            for a in 0..p {
                if x[a] == T::zero() {
                    continue;
                }
                xty[a] += x[a] * y;
                for b in a..p {
                    xtx[[a, b]] += x[a] * x[b];
                }
            }
            rows.push((x.clone(), y));
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[[a, b]] = xtx[[b, a]];
        }
    }
    let tol = T::epsilon() * T::lit(1e4);
    let lu = Lu::new(&xtx, tol).ok_or_else(|| {
        Error::Collinear("regressors are collinear with the unit and period effects".into())
    })?;
    let coef = lu.solve(&xty);
    let rss = rows
        .iter()
        .map(|(x, y)| {
            let fit: T = x.iter().zip(&coef).map(|(&a, &b)| a * b).sum();
            (*y - fit) * (*y - fit)
        })
        .sum();
    Ok(Absorbed { coef, rss, n_obs, n_units, lu })
}

fn fill_row<T: Scalar>(x: &mut [T], i: usize, s: usize, regressors: &[&dyn Fn(usize, usize) -> T]) {
    let k = regressors.len();
    for (slot, f) in x.iter_mut().zip(regressors) {
        *slot = f(i, s);
    }
    for (j, slot) in x[k..].iter_mut().enumerate() {
        *slot = if s == j + 1 { T::one() } else { T::zero() };
    }
}

/// Two-way fixed effects DD on every observed cell.
///
/// Rejects staggered adoption. Balanced and unbalanced masks go through the same
/// absorbed least-squares path, which reduces to double-demeaning when balanced.
pub fn dd_twfe<T: Scalar>(panel: &PanelMatrix<T>) -> Result<DdResult<T>> {
    let (n, t) = panel.values.dim();
    if n < 2 || t < 2 {
        return Err(Error::Degenerate(format!("DD needs at least 2 units and 2 periods, got {n}x{t}")));
    }
    panel.adoption_period()?;
    if panel.control_units().is_empty() {
        return Err(Error::Degenerate("panel has no control units".into()));
    }
    let tau = |i: usize, s: usize| if panel.is_treated_cell(i, s) { T::one() } else { T::zero() };
    let fit = fit_absorbed(panel, |i, s| panel.observed[[i, s]], &[&tau])?;
    let p = fit.coef.len();
    let beta = fit.coef[0];
    let used = fit.n_units + p;
    let df = fit.n_obs.saturating_sub(used);
    let (se, p_value) = if df == 0 {
        (T::infinity(), T::one())
    } else {
        let mut e0 = vec![T::zero(); p];
        e0[0] = T::one();
        let v00 = fit.lu.solve(&e0)[0];
        let sigma2 = fit.rss / T::from_count(df);
        let se = (sigma2 * v00).max(T::zero()).sqrt();
        (se, two_sided_p(beta, se, df))
    };
    Ok(DdResult { beta, se, p_value, n_obs: fit.n_obs, df })
}

fn two_sided_p<T: Scalar>(beta: T, se: T, df: usize) -> T {
    if se == T::zero() {
        return if beta == T::zero() { T::one() } else { T::zero() };
    }
    let tstat = (beta / se).as_f64().abs();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    T::lit((2.0 * (1.0 - dist.cdf(tstat))).clamp(0.0, 1.0))
}

/// Placebo DD on pre-treatment data with treated units relabelled at `placebo_period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrendResult<T> {
    pub dd: DdResult<T>,
    pub reject_95: bool,
    pub reject_90: bool,
}

/// Tests for pre-trends by pretending treatment began at `placebo_period`.
pub fn pretrend_test<T: Scalar>(panel: &PanelMatrix<T>, placebo_period: usize) -> Result<PretrendResult<T>> {
    let start = panel.adoption_period()?;
    if start < 2 {
        return Err(Error::Degenerate(format!("placebo test needs 2 pre-treatment periods, have {start}")));
    }
    if placebo_period == 0 || placebo_period >= start {
        return Err(Error::InvalidArgument(format!(
            "placebo period {placebo_period} must lie in 1..{start}"
        )));
    }
    let treated = panel.treated_units();
    let mut pre = panel.truncate_periods(start);
    for &i in &treated {
        pre.set_treated(i, placebo_period);
    }
    let dd = dd_twfe(&pre)?;
    Ok(PretrendResult {
        dd,
        reject_95: dd.p_value < T::lit(0.05),
        reject_90: dd.p_value < T::lit(0.10),
    })
}

/// Counterfactual `u_i + v_t` fitted on untreated observed cells.
///
/// With a single adoption date on a balanced panel the mean of the implied
/// effects equals the TWFE coefficient.
pub fn dd_counterfactual<T: Scalar>(panel: &PanelMatrix<T>) -> Result<Counterfactual<T>> {
    let (n, t) = panel.values.dim();
    let fit = fit_absorbed(panel, |i, s| panel.is_training_cell(i, s), &[])?;
    let mut v = vec![T::zero(); t];
    v[1..].copy_from_slice(&fit.coef);
    let mut values = Array2::<T>::zeros((n, t));
    let mut defined = Array2::from_elem((n, t), false);
    for i in 0..n {
        let resid: Vec<T> = (0..t)
            .filter(|&s| panel.is_training_cell(i, s))
            .map(|s| panel.values[[i, s]] - v[s])
            .collect();
        if resid.is_empty() {
            continue;
        }
        let u = resid.iter().copied().sum::<T>() / T::from_count(resid.len());
        for s in 0..t {
            values[[i, s]] = u + v[s];
            defined[[i, s]] = true;
        }
    }
    Ok(Counterfactual { values, defined })
}
