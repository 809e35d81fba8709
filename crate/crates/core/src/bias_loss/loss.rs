//! Quintile-bias-penalized objective:
//! `MSE + λ_r · L2 + λ_b · max_j B̂_j²`, where `B̂_j` is the mean prediction
//! error over samples whose label falls in quintile `j`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wealth_index::QuintileCuts;

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig<T> {
    /// Weight of the squared-norm penalty on non-intercept parameters.
    pub lambda_r: T,
    /// Weight of the maximum squared quintile bias.
    pub lambda_b: T,
    pub batch_size: usize,
    pub learning_rate: T,
    /// Learning-rate multiplier applied after every epoch.
    pub decay: T,
    pub epochs: usize,
    pub seed: u64,
}

impl<T: Scalar> LossConfig<T> {
    /// Settings of the reference CNN training: λ_r = 1e-4, λ_b = 5, batch 90, step 1e-4,
    /// decay 0.96 per epoch.
    pub fn reference() -> Self {
        LossConfig {
            lambda_r: T::lit(1e-4),
            lambda_b: T::lit(5.0),
            batch_size: 90,
            learning_rate: T::lit(1e-4),
            decay: T::lit(0.96),
            epochs: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r >= T::zero()) || !(self.lambda_b >= T::zero()) {
            return Err(Error::InvalidArgument("lambda_r and lambda_b must be non-negative".into()));
        }
        if self.batch_size < 5 {
            return Err(Error::InvalidArgument("batch_size must be at least 5".into()));
        }
        if !(self.learning_rate > T::zero()) || !(self.decay > T::zero()) {
            return Err(Error::InvalidArgument("learning_rate and decay must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self::reference()
    }
}

/// Loss value split into its parts, with `total = mse + λ_r·l2 + λ_b·eb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents<T> {
    pub mse: T,
    pub l2: T,
    pub eb: T,
    pub total: T,
}

/// Per-quintile mean of `pred - label`; `None` for quintiles with no samples.
pub fn sample_quintile_bias<T: Scalar>(
    preds: &[T],
    labels: &[T],
    cuts: &QuintileCuts<T>,
) -> Result<[Option<T>; 5]> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions, {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut sums = [T::zero(); 5];
    let mut counts = [0usize; 5];
    for (&p, &y) in preds.iter().zip(labels) {
        let j = cuts.quintile_of(y);
        sums[j] += p - y;
        counts[j] += 1;
    }
    let mut out = [None; 5];
    for j in 0..5 {
        if counts[j] > 0 {
            out[j] = Some(sums[j] / T::from_count(counts[j]));
        }
    }
    Ok(out)
}

/// Index of the quintile attaining `max_j B̂_j²`, lowest index on ties.
pub fn argmax_squared_bias<T: Scalar>(biases: &[Option<T>; 5]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (j, b) in biases.iter().enumerate() {
        if let Some(b) = b {
            let sq = *b * *b;
            if best.map_or(true, |(_, m)| sq > m) {
                best = Some((j, sq));
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Evaluates the objective on one minibatch. `penalized` holds the parameters
/// subject to the L2 term (intercepts excluded by the caller).
pub fn custom_loss<T: Scalar>(
    preds: &[T],
    labels: &[T],
    penalized: &[T],
    cuts: &QuintileCuts<T>,
    config: &LossConfig<T>,
) -> Result<LossComponents<T>> {
    if preds.is_empty() {
        return Err(Error::Empty("empty minibatch".into()));
    }
    let biases = sample_quintile_bias(preds, labels, cuts)?;
    let n = T::from_count(preds.len());
    let mse = preds.iter().zip(labels).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n;
    let l2 = penalized.iter().map(|&w| w * w).sum::<T>();
    let eb = argmax_squared_bias(&biases)
        .and_then(|j| biases[j])
        .map_or(T::zero(), |b| b * b);
    Ok(LossComponents {
        mse,
        l2,
        eb,
        total: mse + config.lambda_r * l2 + config.lambda_b * eb,
    })
}

/// Derivative of the data terms (MSE and bias penalty) with respect to each
/// prediction. The bias term contributes only through the argmax quintile.
pub fn prediction_gradient<T: Scalar>(
    preds: &[T],
    labels: &[T],
    cuts: &QuintileCuts<T>,
    lambda_b: T,
) -> Result<Vec<T>> {
    if preds.is_empty() {
        return Err(Error::Empty("empty minibatch".into()));
    }
    let n = T::from_count(preds.len());
    let two = T::lit(2.0);
    let mut grad: Vec<T> = preds.iter().zip(labels).map(|(&p, &y)| two * (p - y) / n).collect();
    if lambda_b > T::zero() {
        let biases = sample_quintile_bias(preds, labels, cuts)?;
        if let Some(j) = argmax_squared_bias(&biases) {
            let b = biases[j].unwrap();
            let members: Vec<usize> = (0..labels.len()).filter(|&i| cuts.quintile_of(labels[i]) == j).collect();
            let scale = lambda_b * two * b / T::from_count(members.len());
            for i in members {
                grad[i] += scale;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wealth_index::quintile_bounds;
    use proptest::prelude::*;

    fn one_to_ten() -> (Vec<f64>, QuintileCuts<f64>) {
        let labels: Vec<f64> = (1..=10).map(f64::from).collect();
        let cuts = quintile_bounds(&labels).unwrap();
        (labels, cuts)
    }

    #[test]
    fn unbiased_and_shifted() {
        let (y, cuts) = one_to_ten();
        let b = sample_quintile_bias(&y, &y, &cuts).unwrap();
        assert_eq!(b, [Some(0.0); 5]);
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.3).collect();
        let b = sample_quintile_bias(&shifted, &y, &cuts).unwrap();
        for v in b {
            assert!((v.unwrap() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn top_quintile_bias_example() {
        let (y, cuts) = one_to_ten();
        let mut p = y.clone();
        p[8] += 1.0;
        p[9] += 1.0;
        let b = sample_quintile_bias(&p, &y, &cuts).unwrap();
        assert_eq!(b, [Some(0.0), Some(0.0), Some(0.0), Some(0.0), Some(1.0)]);

        let config = LossConfig { lambda_r: 0.0, lambda_b: 5.0, ..LossConfig::reference() };
        let l = custom_loss(&p, &y, &[], &cuts, &config).unwrap();
        assert!((l.mse - 0.2).abs() < 1e-12);
        assert!((l.eb - 1.0).abs() < 1e-12);
        assert!((l.total - 5.2).abs() < 1e-12);
    }

    #[test]
    fn empty_quintile_is_absent() {
        let (_, cuts) = one_to_ten();
        let b = sample_quintile_bias(&[1.0, 2.5], &[1.0, 2.0], &cuts).unwrap();
        assert_eq!(b, [Some(0.25), None, None, None, None]);
        assert!(sample_quintile_bias(&[1.0], &[1.0, 2.0], &cuts).is_err());
    }

    #[test]
    fn degenerate_configs() {
        let (y, cuts) = one_to_ten();
        let zero = LossConfig { lambda_r: 0.0, lambda_b: 0.0, ..LossConfig::reference() };
        assert_eq!(custom_loss(&y, &y, &[0.0, 0.0], &cuts, &zero).unwrap().total, 0.0);
        let p: Vec<f64> = y.iter().map(|v| v * 1.1).collect();
        let only_r = LossConfig { lambda_r: 0.5, lambda_b: 0.0, ..LossConfig::reference() };
        let l = custom_loss(&p, &y, &[1.0, 2.0], &cuts, &only_r).unwrap();
        assert!((l.total - (l.mse + 0.5 * 5.0)).abs() < 1e-12);
        assert!(custom_loss(&[], &[], &[], &cuts, &only_r).is_err());
    }

    #[test]
    fn ties_pick_lowest_quintile() {
        assert_eq!(argmax_squared_bias(&[None, Some(-1.0), Some(1.0), None, Some(0.5)]), Some(1));
        assert_eq!(argmax_squared_bias::<f64>(&[None; 5]), None);
    }

    proptest! {
        #[test]
        fn loss_dominates_mse(
            pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 5..40),
            lr in 0.0f64..2.0, lb in 0.0f64..8.0,
            w in prop::collection::vec(-2.0f64..2.0, 0..5),
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let cuts = quintile_bounds(&y).unwrap();
            let cfg = LossConfig { lambda_r: lr, lambda_b: lb, ..LossConfig::reference() };
            let l = custom_loss(&p, &y, &w, &cuts, &cfg).unwrap();
            prop_assert!(l.total >= l.mse);
            let zero = LossConfig { lambda_r: 0.0, lambda_b: 0.0, ..cfg };
            let l0 = custom_loss(&p, &y, &w, &cuts, &zero).unwrap();
            prop_assert_eq!(l0.total, l0.mse);
        }

        #[test]
        fn bias_is_shift_equivariant(
            pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 5..40),
            c in -2.0f64..2.0,
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let cuts = quintile_bounds(&y).unwrap();
            let b0 = sample_quintile_bias(&p, &y, &cuts).unwrap();
            let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
            let b1 = sample_quintile_bias(&shifted, &y, &cuts).unwrap();
            for (a, b) in b0.iter().zip(b1.iter()) {
                match (a, b) {
                    (Some(a), Some(b)) => prop_assert!((b - a - c).abs() < 1e-9),
                    (None, None) => {}
                    _ => prop_assert!(false, "membership changed"),
                }
            }
        }
    }
}
