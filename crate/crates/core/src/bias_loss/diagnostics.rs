//! Attenuation diagnostics for predicted outcomes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Linear measurement map `y' = alpha + phi * y` from true to predicted outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerksonMap<T> {
    pub alpha: T,
    pub phi: T,
}

impl<T: Scalar> BerksonMap<T> {
    #[inline]
    pub fn apply(&self, y: T) -> T {
        self.alpha + self.phi * y
    }
}

/// OLS of `preds` on `labels`: returns `(slope, r²)`.
pub fn slope_diagnostic<T: Scalar>(preds: &[T], labels: &[T]) -> Result<(T, T)> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch(format!("{} predictions, {} labels", preds.len(), labels.len())));
    }
    if preds.len() < 3 {
        return Err(Error::Degenerate("slope diagnostic needs at least 3 points".into()));
    }
    let n = T::from_count(preds.len());
    let mp = preds.iter().copied().sum::<T>() / n;
    let my = labels.iter().copied().sum::<T>() / n;
    let (mut sxy, mut syy, mut sxx) = (T::zero(), T::zero(), T::zero());
    for (&p, &y) in preds.iter().zip(labels) {
        sxy += (p - mp) * (y - my);
        syy += (y - my) * (y - my);
        sxx += (p - mp) * (p - mp);
    }
    if !(syy > T::zero()) {
        return Err(Error::Degenerate("labels are constant".into()));
    }
    let phi = sxy / syy;
    let r2 = if sxx > T::zero() { sxy * sxy / (sxx * syy) } else { T::zero() };
    Ok((phi, r2))
}

/// Difference-in-differences estimate under the map `y' = alpha + phi * y`:
/// the level shift cancels and the effect scales by `phi`.
pub fn berkson_dd_bias<T: Scalar>(beta: T, phi: T) -> T {
    phi * beta
}
