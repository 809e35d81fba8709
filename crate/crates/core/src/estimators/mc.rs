//! Matrix completion by soft-impute with unit and time fixed effects.
//!
//! Fits `Y ≈ a 1ᵀ + 1 bᵀ + L` on the untreated observed cells `Ω` by
//! minimizing `Σ_Ω (Y − a_i − b_t − L)² / |Ω| + λ‖L‖_*`. The fixed effects
//! are unpenalized. Soft-impute minimizes `½Σ_Ω(·)² + λ'‖L‖_*`, so the
//! singular-value threshold is `λ' = λ|Ω|/2`. Each iteration takes one exact
//! step on the fixed effects and one singular-value shrinkage step on `L`,
//! so the objective never increases.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::effects::Counterfactual;
use super::{geometric_grid, pick_lambda, CvOutcome};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, sym_eigen};
use crate::panel::PanelMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct McFit<T> {
    /// Completed matrix `a_i + b_t + L`.
    pub l_hat: Array2<T>,
    pub low_rank: Array2<T>,
    pub unit_effects: Array1<T>,
    pub time_effects: Array1<T>,
    pub lambda: T,
    pub iterations: usize,
    /// Objective after each iteration.
    pub objective_trace: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> McFit<T> {
    pub fn counterfactual(&self) -> Counterfactual<T> {
        Counterfactual::full(self.l_hat.clone())
    }

    fn state(&self) -> State<T> {
        State { a: self.unit_effects.clone(), b: self.time_effects.clone(), l: self.low_rank.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions<T> {
    /// Relative Frobenius change in the fitted matrix that ends the iteration.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for McOptions<T> {
    fn default() -> Self {
        McOptions { tol: T::lit(1e-6), max_iter: 500 }
    }
}

struct Problem<T> {
    y: Array2<T>,
    mask: Array2<bool>,
    n_obs: usize,
    row_count: Vec<T>,
    col_count: Vec<T>,
}

#[derive(Clone)]
struct State<T> {
    a: Array1<T>,
    b: Array1<T>,
    l: Array2<T>,
}

impl<T: Scalar> State<T> {
    fn fitted(&self) -> Array2<T> {
        Array2::from_shape_fn(self.l.dim(), |(i, s)| self.a[i] + self.b[s] + self.l[[i, s]])
    }
}

fn problem<T: Scalar>(panel: &PanelMatrix<T>) -> Result<Problem<T>> {
    let (n, t) = panel.values.dim();
    let mask = Array2::from_shape_fn((n, t), |(i, s)| panel.is_training_cell(i, s));
    let row_count: Vec<usize> = mask.rows().into_iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
    let col_count: Vec<usize> = mask.columns().into_iter().map(|c| c.iter().filter(|&&b| b).count()).collect();
    if let Some(i) = row_count.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!("unit {} has no untreated observed cell", panel.unit_ids[i])));
    }
    if let Some(s) = col_count.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(format!("period {} has no untreated observed cell", panel.period_labels[s])));
    }
    let n_obs = row_count.iter().sum();
    let y = Array2::from_shape_fn((n, t), |(i, s)| if mask[[i, s]] { panel.values[[i, s]] } else { T::zero() });
    Ok(Problem {
        y,
        mask,
        n_obs,
        row_count: row_count.into_iter().map(T::from_count).collect(),
        col_count: col_count.into_iter().map(T::from_count).collect(),
    })
}

/// One pass of exact block minimization over `a` then `b`, holding `L` fixed.
fn update_effects<T: Scalar>(p: &Problem<T>, st: &mut State<T>) {
    let (n, t) = p.y.dim();
    for i in 0..n {
        let mut acc = T::zero();
        for s in 0..t {
            if p.mask[[i, s]] {
                acc += p.y[[i, s]] - st.l[[i, s]] - st.b[s];
            }
        }
        st.a[i] = acc / p.row_count[i];
    }
    for s in 0..t {
        let mut acc = T::zero();
        for i in 0..n {
            if p.mask[[i, s]] {
                acc += p.y[[i, s]] - st.l[[i, s]] - st.a[i];
            }
        }
        st.b[s] = acc / p.col_count[s];
    }
}

/// Two-way fixed-effects fit on `Ω` with `L = 0`.
fn effects_only<T: Scalar>(p: &Problem<T>) -> State<T> {
    let (n, t) = p.y.dim();
    let mut st = State { a: Array1::zeros(n), b: Array1::zeros(t), l: Array2::zeros((n, t)) };
    for _ in 0..10_000 {
        let before = st.fitted();
        update_effects(p, &mut st);
        let after = st.fitted();
        if frobenius(&(&after - &before)) <= T::epsilon() * T::lit(16.0) * frobenius(&after).max(T::one()) {
            break;
        }
    }
    st
}

fn residual<T: Scalar>(p: &Problem<T>, st: &State<T>) -> Array2<T> {
    Array2::from_shape_fn(p.y.dim(), |(i, s)| {
        if p.mask[[i, s]] {
            p.y[[i, s]] - st.a[i] - st.b[s]
        } else {
            T::zero()
        }
    })
}

/// Singular-value shrinkage `Z ↦ U max(Σ − θ, 0) Vᵀ`, returning the result and
/// its nuclear norm. Works on the smaller Gram matrix of `Z`.
fn shrink<T: Scalar>(z: &Array2<T>, theta: T) -> (Array2<T>, T) {
    let (n, m) = z.dim();
    let tall = n >= m;
    let gram = if tall { z.t().dot(z) } else { z.dot(&z.t()) };
    let (eig, vecs) = sym_eigen(&gram);
    let k = eig.len();
    let mut factors = vec![T::zero(); k];
    let mut nuclear = T::zero();
    for j in 0..k {
        let sigma = eig[j].max(T::zero()).sqrt();
        if sigma > theta {
            factors[j] = (sigma - theta) / sigma;
            nuclear += sigma - theta;
        }
    }
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| x * factors[j]);
    }
    let proj = scaled.dot(&vecs.t());
    let out = if tall { z.dot(&proj) } else { proj.dot(z) };
    (out, nuclear)
}

fn top_singular_value<T: Scalar>(z: &Array2<T>) -> T {
    let (n, m) = z.dim();
    let gram = if n >= m { z.t().dot(z) } else { z.dot(&z.t()) };
    sym_eigen(&gram).0.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt()
}

fn lambda_max_of<T: Scalar>(p: &Problem<T>, fe: &State<T>) -> T {
    T::lit(2.0) * top_singular_value(&residual(p, fe)) / T::from_count(p.n_obs)
}

/// `λ` at and above which `L = 0` and the fit is the two-way fixed-effects imputation.
pub fn mc_lambda_max<T: Scalar>(panel: &PanelMatrix<T>) -> Result<T> {
    let p = problem(panel)?;
    Ok(lambda_max_of(&p, &effects_only(&p)))
}

/// Default MC penalty grid: eight geometric steps from `λ_max` down to `λ_max/1000`.
pub fn mc_default_grid<T: Scalar>(panel: &PanelMatrix<T>) -> Result<Vec<T>> {
    let top = mc_lambda_max(panel)?;
    let top = if top > T::zero() { top } else { T::one() };
    Ok(geometric_grid(top, T::lit(1e-3), 8))
}

fn iterate<T: Scalar>(p: &Problem<T>, lambda: T, opts: &McOptions<T>, mut st: State<T>) -> (State<T>, Vec<T>, usize, bool) {
    let theta = lambda * T::from_count(p.n_obs) / T::lit(2.0);
    let inv_obs = T::one() / T::from_count(p.n_obs);
    let mut trace = Vec::new();
    let mut fitted = st.fitted();
    for it in 1..=opts.max_iter {
        update_effects(p, &mut st);
        let z = Array2::from_shape_fn(st.l.dim(), |(i, s)| {
            if p.mask[[i, s]] {
                p.y[[i, s]] - st.a[i] - st.b[s]
            } else {
                st.l[[i, s]]
            }
        });
        let (next, nuclear) = shrink(&z, theta);
        st.l = next;
        let new_fit = st.fitted();
        let sse: T = ndarray::Zip::from(&new_fit)
            .and(&p.y)
            .and(&p.mask)
            .fold(T::zero(), |acc, &f, &y, &m| if m { acc + (y - f) * (y - f) } else { acc });
        trace.push(sse * inv_obs + lambda * nuclear);
        let diff = frobenius(&(&new_fit - &fitted));
        let size = frobenius(&new_fit).max(T::min_positive_value());
        fitted = new_fit;
        if diff <= opts.tol * size || diff == T::zero() {
            return (st, trace, it, true);
        }
    }
    (st, trace, opts.max_iter, false)
}

/// Soft-impute from a warm start, or from the fixed-effects fit with `L = 0`.
/// Without a warm start and for small `λ`, the iteration first walks a
/// geometric path down from `λ_max`, warm-starting each stage. The answer is
/// the same minimizer; the path only avoids the slow decay of the spurious
/// components a cold start introduces. The returned trace covers the final stage.
fn soft_impute<T: Scalar>(
    p: &Problem<T>,
    lambda: T,
    opts: &McOptions<T>,
    warm: Option<State<T>>,
) -> (State<T>, Vec<T>, usize, bool) {
    if let Some(w) = warm {
        return iterate(p, lambda, opts, w);
    }
    let mut st = effects_only(p);
    let top = lambda_max_of(p, &st);
    let step = T::lit(0.25);
    if !(lambda < top * step) {
        return iterate(p, lambda, opts, st);
    }
    let mut total = 0;
    let mut stage = top * step;
    while stage > lambda {
        let (next, _, it, _) = iterate(p, stage, opts, st);
        st = next;
        total += it;
        stage = stage * step;
    }
    let (st, trace, it, converged) = iterate(p, lambda, opts, st);
    (st, trace, total + it, converged)
}

fn finish<T: Scalar>(st: State<T>, lambda: T, trace: Vec<T>, iterations: usize, converged: bool) -> McFit<T> {
    McFit {
        l_hat: st.fitted(),
        low_rank: st.l,
        unit_effects: st.a,
        time_effects: st.b,
        lambda,
        iterations,
        objective_trace: trace,
        converged,
    }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be finite and non-negative, got {lambda}")))
    }
}

fn check_warm<T: Scalar>(p: &Problem<T>, warm: Option<&McFit<T>>) -> Result<()> {
    match warm {
        Some(w) if w.low_rank.dim() != p.y.dim() => {
            Err(Error::LengthMismatch("warm start does not match the panel shape".into()))
        }
        _ => Ok(()),
    }
}

/// Completes the untreated outcome matrix at a fixed penalty.
///
/// Fails with [`Error::NotConverged`] (carrying the objective trace) when the
/// relative change does not fall below `tol` within `max_iter` iterations.
pub fn matrix_complete<T: Scalar>(panel: &PanelMatrix<T>, lambda: T, opts: &McOptions<T>) -> Result<McFit<T>> {
    check_lambda(lambda)?;
    let p = problem(panel)?;
    let (st, trace, iterations, converged) = soft_impute(&p, lambda, opts, None);
    if !converged {
        let last_change = relative_step(&p, &st, lambda, opts);
        return Err(Error::NotConverged {
            iterations,
            last_change,
            objective_trace: trace.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(finish(st, lambda, trace, iterations, true))
}

/// Like [`matrix_complete`] but starts from `warm` when given and returns the
/// last iterate when the iteration cap is hit.
pub fn matrix_complete_lenient<T: Scalar>(
    panel: &PanelMatrix<T>,
    lambda: T,
    opts: &McOptions<T>,
    warm: Option<&McFit<T>>,
) -> Result<McFit<T>> {
    check_lambda(lambda)?;
    let p = problem(panel)?;
    check_warm(&p, warm)?;
    let (st, trace, iterations, converged) = soft_impute(&p, lambda, opts, warm.map(McFit::state));
    Ok(finish(st, lambda, trace, iterations, converged))
}

fn relative_step<T: Scalar>(p: &Problem<T>, st: &State<T>, lambda: T, opts: &McOptions<T>) -> f64 {
    let once = McOptions { max_iter: 1, ..*opts };
    let before = st.fitted();
    let (next, _, _, _) = iterate(p, lambda, &once, st.clone());
    let after = next.fitted();
    (frobenius(&(&after - &before)) / frobenius(&after).max(T::min_positive_value())).as_f64()
}

/// Chooses λ by hiding a random `holdout_fraction` of the observed control
/// cells, completing, and scoring RMSE on the hidden cells; averaged over
/// `reps` draws. Ties go to the larger λ.
pub fn mc_cv_lambda<T: Scalar>(
    panel: &PanelMatrix<T>,
    grid: &[T],
    holdout_fraction: f64,
    reps: usize,
    seed: u64,
    opts: &McOptions<T>,
) -> Result<CvOutcome<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    for &l in grid {
        check_lambda(l)?;
    }
    if grid.len() == 1 {
        return Ok(CvOutcome { lambda: grid[0], scores: vec![(grid[0], T::nan())] });
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) || reps == 0 {
        return Err(Error::InvalidArgument("holdout fraction must lie in (0, 1) and reps be positive".into()));
    }
    let (n, t) = panel.values.dim();
    let candidates: Vec<(usize, usize)> = panel
        .control_units()
        .into_iter()
        .flat_map(|i| (0..t).map(move |s| (i, s)))
        .filter(|&(i, s)| panel.observed[[i, s]])
        .collect();
    let k = ((candidates.len() as f64) * holdout_fraction).round() as usize;
    if k == 0 {
        return Err(Error::Empty("holdout set is empty".into()));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].partial_cmp(&grid[a]).unwrap());

    let per_rep: Vec<Result<Vec<T>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, &[0x4d43_4356, rep as u64]);
            let mut cells = candidates.clone();
            cells.shuffle(&mut rng);
            let mut masked = panel.clone();
            let mut row_left: Vec<usize> = (0..n).map(|i| (0..t).filter(|&s| panel.is_training_cell(i, s)).count()).collect();
            let mut col_left: Vec<usize> = (0..t).map(|s| (0..n).filter(|&i| panel.is_training_cell(i, s)).count()).collect();
            let mut held = Vec::with_capacity(k);
            for &(i, s) in &cells {
                if held.len() == k {
                    break;
                }
                if row_left[i] > 1 && col_left[s] > 1 {
                    masked.observed[[i, s]] = false;
                    row_left[i] -= 1;
                    col_left[s] -= 1;
                    held.push((i, s));
                }
            }
            if held.is_empty() {
                return Err(Error::Empty("holdout set is empty".into()));
            }
            let mut rmse = vec![T::zero(); grid.len()];
            let mut warm: Option<McFit<T>> = None;
            for &g in &order {
                let fit = matrix_complete_lenient(&masked, grid[g], opts, warm.as_ref())?;
                let sse: T = held
                    .iter()
                    .map(|&(i, s)| {
                        let e = panel.values[[i, s]] - fit.l_hat[[i, s]];
                        e * e
                    })
                    .sum();
                rmse[g] = (sse / T::from_count(held.len())).sqrt();
                warm = Some(fit);
            }
            Ok(rmse)
        })
        .collect();
    let mut mean = vec![T::zero(); grid.len()];
    for r in per_rep {
        for (m, v) in mean.iter_mut().zip(r?) {
            *m += v;
        }
    }
    let scores: Vec<(T, T)> = grid
        .iter()
        .zip(&mean)
        .map(|(&l, &m)| (l, m / T::from_count(reps)))
        .collect();
    Ok(CvOutcome { lambda: pick_lambda(&scores), scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_penalty_fully_observed_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Array2::from_shape_fn((9, 5), |_| rng.gen_range(-2.0..2.0));
        let p = PanelMatrix::from_values(y.clone());
        let fit = matrix_complete(&p, 0.0, &McOptions::default()).unwrap();
        assert!(frobenius(&(&fit.l_hat - &y)) < 1e-10);
    }

    #[test]
    fn shrink_diagonal() {
        let z: Array2<f64> = array![[3.0, 0.0], [0.0, 1.0]];
        let (out, nuclear) = shrink(&z, 1.0);
        assert!((out[[0, 0]] - 2.0).abs() < 1e-12);
        assert!(out[[1, 1]].abs() < 1e-12 && out[[0, 1]].abs() < 1e-12);
        assert!((nuclear - 2.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_above_max_gives_two_way_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Array2<f64> = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-1.0..1.0));
        let p = PanelMatrix::from_values(y.clone());
        let top = mc_lambda_max(&p).unwrap();
        let fit = matrix_complete(&p, top * 1.0001, &McOptions::default()).unwrap();
        let grand = y.sum() / 28.0;
        let rows = y.mean_axis(Axis(1)).unwrap();
        let cols = y.mean_axis(Axis(0)).unwrap();
        assert!(fit.low_rank.iter().all(|&v| v.abs() < 1e-12));
        for i in 0..7 {
            for s in 0..4 {
                assert!((fit.l_hat[[i, s]] - (rows[i] + cols[s] - grand)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empty_row_is_rejected() {
        let mut p = PanelMatrix::from_values(Array2::<f64>::ones((3, 3)));
        p.set_treated(0, 0);
        assert!(matrix_complete(&p, 0.1, &McOptions::default()).is_err());
        let q = PanelMatrix::from_values(Array2::<f64>::ones((3, 3)));
        assert!(matrix_complete(&q, -0.1, &McOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = Array2::from_shape_fn((10, 6), |_| rng.gen_range(-1.0..1.0));
        let mut p = PanelMatrix::from_values(y);
        for i in 0..5 {
            p.observed[[i, i]] = false;
        }
        let opts = McOptions { tol: 1e-15, max_iter: 3 };
        match matrix_complete(&p, 1e-3, &opts) {
            Err(Error::NotConverged { objective_trace, .. }) => assert_eq!(objective_trace.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
