//! Elastic-net regression by cyclic coordinate descent.
//!
//! Objective: `(1/2n)·RSS + λ[α‖w‖₁ + (1−α)/2·‖w‖²]` with an unpenalized
//! intercept, solved on centered data.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EnetFit<T> {
    pub intercept: T,
    pub weights: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> EnetFit<T> {
    pub fn predict(&self, x: &[T]) -> T {
        self.intercept + self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnetOptions<T> {
    /// Stop once a full sweep lowers the objective by less than `tol` relative to its value.
    pub tol: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for EnetOptions<T> {
    fn default() -> Self {
        EnetOptions { tol: T::lit(1e-7), max_sweeps: 100_000 }
    }
}

#[inline]
pub fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// Fits `y ≈ μ + x w` for `x` of shape `n x p`.
pub fn elastic_net<T: Scalar>(
    x: ArrayView2<T>,
    y: &[T],
    alpha: T,
    lambda: T,
    opts: &EnetOptions<T>,
) -> Result<EnetFit<T>> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("design has {n} rows, target has {}", y.len())));
    }
    if n == 0 {
        return Err(Error::Empty("elastic net needs at least one row".into()));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let nf = T::from_count(n);
    let ybar = y.iter().copied().sum::<T>() / nf;
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    for j in 0..p {
        let c = x.column(j);
        let m = c.iter().copied().sum::<T>() / nf;
        means.push(m);
        cols.push(c.iter().map(|&v| v - m).collect());
    }
    let scale: Vec<T> = cols.iter().map(|c| c.iter().map(|&v| v * v).sum::<T>() / nf).collect();
    let l1 = lambda * alpha;
    let l2 = lambda * (T::one() - alpha);
    let mut r: Vec<T> = y.iter().map(|&v| v - ybar).collect();
    let mut w = vec![T::zero(); p];
    let half_inv_n = T::lit(0.5) / nf;
    let objective = |r: &[T], w: &[T]| {
        half_inv_n * r.iter().map(|&v| v * v).sum::<T>()
            + w.iter().map(|&v| l1 * v.abs() + T::lit(0.5) * l2 * v * v).sum::<T>()
    };
    let mut prev = objective(&r, &w);
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut moved = false;
        for j in 0..p {
            let denom = scale[j] + l2;
            if denom <= T::zero() {
                continue;
            }
            let c = &cols[j];
            let rho = c.iter().zip(&r).map(|(&a, &b)| a * b).sum::<T>() / nf + scale[j] * w[j];
            let new = soft_threshold(rho, l1) / denom;
            let step = new - w[j];
            if step != T::zero() {
                for (ri, &ci) in r.iter_mut().zip(c) {
                    *ri -= step * ci;
                }
                w[j] = new;
                moved = true;
            }
        }
        let obj = objective(&r, &w);
        if !moved || prev - obj <= opts.tol * obj {
            break;
        }
        prev = obj;
    }
    let intercept = ybar - w.iter().zip(&means).map(|(&a, &b)| a * b).sum::<T>();
    Ok(EnetFit { intercept, weights: w, iterations: sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn unpenalized_fit_recovers_linear_target() {
        let x = Array2::from_shape_fn((12, 3), |(i, j)| ((i * (j + 2)) % 7) as f64 + 0.1 * j as f64);
        let y: Vec<f64> = (0..12).map(|i| 2.0 + x[[i, 0]] - 0.5 * x[[i, 2]]).collect();
        let f = elastic_net(x.view(), &y, 0.5, 0.0, &EnetOptions::default()).unwrap();
        for i in 0..12 {
            let row: Vec<f64> = x.row(i).to_vec();
            assert!((f.predict(&row) - y[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn huge_penalty_leaves_intercept_only() {
        let x = Array2::from_shape_fn((8, 2), |(i, j)| (i + j) as f64);
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 + 1.0).collect();
        let f = elastic_net(x.view(), &y, 0.5, 1e6, &EnetOptions::default()).unwrap();
        assert!(f.weights.iter().all(|&w| w == 0.0));
        assert!((f.intercept - y.iter().sum::<f64>() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        let x = Array2::<f64>::zeros((3, 1));
        assert!(elastic_net(x.view(), &[1.0, 2.0], 0.5, 0.1, &EnetOptions::default()).is_err());
        assert!(elastic_net(x.view(), &[1.0, 2.0, 3.0], 0.5, -0.1, &EnetOptions::default()).is_err());
        assert!(elastic_net(x.view(), &[1.0, 2.0, 3.0], 1.5, 0.1, &EnetOptions::default()).is_err());
    }
}
