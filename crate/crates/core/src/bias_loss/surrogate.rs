//! Surrogate outcome predictors trained by minibatch gradient descent on the
//! quintile-bias-penalized objective.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::diagnostics::slope_diagnostic;
use super::loss::{custom_loss, prediction_gradient, LossComponents, LossConfig};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::wealth_index::{quintile_bounds, QuintileCuts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Linear,
    /// One tanh hidden layer of the given width.
    Mlp { hidden: usize },
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::Linear
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateParams<T> {
    Linear {
        weights: Array1<T>,
        intercept: T,
    },
    Mlp {
        /// `hidden x input`
        w1: Array2<T>,
        b1: Array1<T>,
        w2: Array1<T>,
        b2: T,
    },
}

impl<T: Scalar> SurrogateParams<T> {
    pub fn n_inputs(&self) -> usize {
        match self {
            SurrogateParams::Linear { weights, .. } => weights.len(),
            SurrogateParams::Mlp { w1, .. } => w1.ncols(),
        }
    }

    pub fn predict(&self, x: ArrayView1<T>) -> T {
        match self {
            SurrogateParams::Linear { weights, intercept } => weights.dot(&x) + *intercept,
            SurrogateParams::Mlp { w1, b1, w2, b2 } => {
                let h = (w1.dot(&x) + b1).mapv(|z| z.tanh());
                w2.dot(&h) + *b2
            }
        }
    }

    pub fn predict_all(&self, x: ArrayView2<T>) -> Vec<T> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }

    /// Parameters in a fixed order: linear `[w.., b]`; MLP `[w1 (row-major), b1, w2, b2]`.
    pub fn flatten(&self) -> Vec<T> {
        match self {
            SurrogateParams::Linear { weights, intercept } => {
                let mut v = weights.to_vec();
                v.push(*intercept);
                v
            }
            SurrogateParams::Mlp { w1, b1, w2, b2 } => {
                let mut v: Vec<T> = w1.iter().copied().collect();
                v.extend(b1.iter());
                v.extend(w2.iter());
                v.push(*b2);
                v
            }
        }
    }

    /// Same architecture with parameters read from `flat` (layout of [`Self::flatten`]).
    pub fn with_flat(&self, flat: &[T]) -> Self {
        match self {
            SurrogateParams::Linear { weights, .. } => {
                let d = weights.len();
                SurrogateParams::Linear {
                    weights: Array1::from(flat[..d].to_vec()),
                    intercept: flat[d],
                }
            }
            SurrogateParams::Mlp { w1, .. } => {
                let (h, d) = w1.dim();
                let mut k = 0;
                let mut take = |n: usize| {
                    let s = flat[k..k + n].to_vec();
                    k += n;
                    s
                };
                SurrogateParams::Mlp {
                    w1: Array2::from_shape_vec((h, d), take(h * d)).unwrap(),
                    b1: Array1::from(take(h)),
                    w2: Array1::from(take(h)),
                    b2: take(1)[0],
                }
            }
        }
    }

    /// `true` for weights subject to the L2 penalty; biases and intercepts are not.
    pub fn penalized_mask(&self) -> Vec<bool> {
        match self {
            SurrogateParams::Linear { weights, .. } => {
                let mut m = vec![true; weights.len()];
                m.push(false);
                m
            }
            SurrogateParams::Mlp { w1, .. } => {
                let (h, d) = w1.dim();
                let mut m = vec![true; h * d];
                m.extend(std::iter::repeat(false).take(h));
                m.extend(std::iter::repeat(true).take(h));
                m.push(false);
                m
            }
        }
    }

    /// Adds `upstream · ∂f(x)/∂θ` into `grad` (flattened layout).
    pub fn accumulate_gradient(&self, x: ArrayView1<T>, upstream: T, grad: &mut [T]) {
        match self {
            SurrogateParams::Linear { weights, .. } => {
                let d = weights.len();
                for j in 0..d {
                    grad[j] += upstream * x[j];
                }
                grad[d] += upstream;
            }
            SurrogateParams::Mlp { w1, b1, w2, .. } => {
                let (h, d) = w1.dim();
                let act = (w1.dot(&x) + b1).mapv(|z| z.tanh());
                let (o_b1, o_w2, o_b2) = (h * d, h * d + h, h * d + 2 * h);
                for k in 0..h {
                    let dz = upstream * w2[k] * (T::one() - act[k] * act[k]);
                    for j in 0..d {
                        grad[k * d + j] += dz * x[j];
                    }
                    grad[o_b1 + k] += dz;
                    grad[o_w2 + k] += upstream * act[k];
                }
                grad[o_b2] += upstream;
            }
        }
    }

    fn penalized_values(&self, flat: &[T]) -> Vec<T> {
        flat.iter()
            .zip(self.penalized_mask())
            .filter(|(_, m)| *m)
            .map(|(v, _)| *v)
            .collect()
    }

    fn init(arch: Architecture, d: usize, seed: u64) -> Self {
        match arch {
            Architecture::Linear => SurrogateParams::Linear {
                weights: Array1::zeros(d),
                intercept: T::zero(),
            },
            Architecture::Mlp { hidden } => {
                let mut rng = stream_rng(seed, &[0x1A17]);
                let (s1, s2) = (1.0 / (d as f64).sqrt(), 1.0 / (hidden as f64).sqrt());
                SurrogateParams::Mlp {
                    w1: Array2::from_shape_fn((hidden, d), |_| T::lit(rng.gen_range(-s1..s1))),
                    b1: Array1::zeros(hidden),
                    w2: Array1::from_shape_fn(hidden, |_| T::lit(rng.gen_range(-s2..s2))),
                    b2: T::zero(),
                }
            }
        }
    }
}

/// Objective and its analytic gradient on one batch.
pub fn loss_and_gradient<T: Scalar>(
    params: &SurrogateParams<T>,
    x: ArrayView2<T>,
    y: &[T],
    cuts: &QuintileCuts<T>,
    config: &LossConfig<T>,
) -> Result<(LossComponents<T>, Vec<T>)> {
    let flat = params.flatten();
    let preds = params.predict_all(x);
    let loss = custom_loss(&preds, y, &params.penalized_values(&flat), cuts, config)?;
    let upstream = prediction_gradient(&preds, y, cuts, config.lambda_b)?;
    let mut grad = vec![T::zero(); flat.len()];
    for (row, &u) in x.rows().into_iter().zip(&upstream) {
        params.accumulate_gradient(row, u, &mut grad);
    }
    let two = T::lit(2.0);
    for ((g, &w), m) in grad.iter_mut().zip(&flat).zip(params.penalized_mask()) {
        if m {
            *g += two * config.lambda_r * w;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub loss: LossComponents<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel<T> {
    pub params: SurrogateParams<T>,
    /// Quintile cuts of the full training labels, fixed before the first step.
    pub quintile_cuts: QuintileCuts<T>,
    /// Full-training-set loss after each epoch.
    pub history: Vec<EpochRecord<T>>,
}

impl<T: Scalar> SurrogateModel<T> {
    pub fn predict(&self, x: ArrayView2<T>) -> Vec<T> {
        self.params.predict_all(x)
    }
}

/// Minibatch gradient descent with per-epoch step decay.
///
/// Each epoch visits a fresh seeded permutation in full batches of
/// `batch_size`; a trailing partial batch is skipped.
pub fn train_surrogate<T: Scalar>(
    features: ArrayView2<T>,
    labels: &[T],
    config: &LossConfig<T>,
    arch: Architecture,
) -> Result<SurrogateModel<T>> {
    config.validate()?;
    let (n, d) = features.dim();
    if labels.len() != n {
        return Err(Error::LengthMismatch(format!("{n} feature rows, {} labels", labels.len())));
    }
    if n < config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "{n} samples is fewer than batch_size {}",
            config.batch_size
        )));
    }
    if labels.iter().all(|&v| v == labels[0]) {
        return Err(Error::Degenerate("labels are constant".into()));
    }
    if let Architecture::Mlp { hidden: 0 } = arch {
        return Err(Error::InvalidArgument("hidden width must be positive".into()));
    }
    let cuts = quintile_bounds(labels)?;
    let mut params = SurrogateParams::init(arch, d, config.seed);
    let mut rng = stream_rng(config.seed, &[0x5EED]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = config.learning_rate;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks_exact(config.batch_size) {
            let xb = features.select(ndarray::Axis(0), batch);
            let yb: Vec<T> = batch.iter().map(|&i| labels[i]).collect();
            let (_, grad) = loss_and_gradient(&params, xb.view(), &yb, &cuts, config)?;
            let mut flat = params.flatten();
            for (w, g) in flat.iter_mut().zip(&grad) {
                *w -= lr * *g;
            }
            params = params.with_flat(&flat);
        }
        lr = lr * config.decay;
        let preds = params.predict_all(features);
        let flat = params.flatten();
        let loss = custom_loss(&preds, labels, &params.penalized_values(&flat), &cuts, config)?;
        if !loss.total.is_finite() || flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: format!(
                    "loss {} (mse {}, eb {}) at step size {}",
                    loss.total,
                    loss.mse,
                    loss.eb,
                    lr / config.decay
                ),
            });
        }
        history.push(EpochRecord { epoch, loss });
    }
    Ok(SurrogateModel {
        params,
        quintile_cuts: cuts,
        history,
    })
}

/// Outcome of training at one `λ_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T> {
    pub lambda_b: T,
    /// Slope of predicted on observed, on the validation split.
    pub phi: T,
    pub r2: T,
    pub model: SurrogateModel<T>,
}

/// Trains one surrogate per `λ_b` (in parallel) and scores each on the
/// validation split.
pub fn sweep_lambda_b<T: Scalar>(
    train: (ArrayView2<T>, &[T]),
    validation: (ArrayView2<T>, &[T]),
    base: &LossConfig<T>,
    arch: Architecture,
    grid: &[T],
) -> Result<Vec<SweepPoint<T>>> {
    grid.par_iter()
        .map(|&lambda_b| {
            let cfg = LossConfig { lambda_b, ..base.clone() };
            let model = train_surrogate(train.0, train.1, &cfg, arch)?;
            let preds = model.predict(validation.0);
            let (phi, r2) = slope_diagnostic(&preds, validation.1)?;
            Ok(SweepPoint { lambda_b, phi, r2, model })
        })
        .collect()
}

/// The `λ_b` whose slope is closest to one; the smaller `λ_b` wins ties.
pub fn select_lambda_b<T: Scalar>(points: &[SweepPoint<T>]) -> Option<T> {
    points
        .iter()
        .min_by(|a, b| {
            let da = (a.phi - T::one()).abs();
            let db = (b.phi - T::one()).abs();
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.lambda_b.partial_cmp(&b.lambda_b).unwrap_or(std::cmp::Ordering::Equal))
        })
        .map(|p| p.lambda_b)
}
