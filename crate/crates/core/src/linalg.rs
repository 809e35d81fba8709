//! Small dense linear algebra: one-sided Jacobi SVD and LU solves.
//!
//! Panels in this crate are tall and thin (thousands of units, a dozen or two
//! periods), which is the regime where one-sided Jacobi is both accurate and
//! cheap: every sweep costs `O(n m^2)` on an `n x m` matrix with `m` small.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `a = u * diag(s) * vt`.
///
/// For an `n x m` input with `k = min(n, m)`: `u` is `n x k`, `s` has length `k`
/// sorted descending, `vt` is `k x m`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub s: Array1<T>,
    pub vt: Array2<T>,
}

impl<T: Scalar> Svd<T> {
    /// Rebuilds `u * diag(s) * vt`, skipping zero singular values.
    pub fn reconstruct(&self) -> Array2<T> {
        reconstruct(&self.u, self.s.as_slice().unwrap(), &self.vt)
    }
}

/// `u * diag(s) * vt` over the leading components with `s > 0`.
pub fn reconstruct<T: Scalar>(u: &Array2<T>, s: &[T], vt: &Array2<T>) -> Array2<T> {
    let r = s.iter().take_while(|&&x| x > T::zero()).count();
    let (n, m) = (u.nrows(), vt.ncols());
    if r == 0 {
        return Array2::zeros((n, m));
    }
    let mut us = u.slice(ndarray::s![.., ..r]).to_owned();
    for (k, mut col) in us.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|x| x * s[k]);
    }
    us.dot(&vt.slice(ndarray::s![..r, ..]))
}

/// Computes the thin SVD by one-sided (Hestenes) Jacobi rotations.
pub fn svd<T: Scalar>(a: ArrayView2<T>) -> Svd<T> {
    let (n, m) = a.dim();
    if n < m {
        let t = svd(a.t());
        return Svd {
            u: t.vt.t().to_owned(),
            s: t.s,
            vt: t.u.t().to_owned(),
        };
    }
    // Rows of `w` are the columns of `a`; rows of `v` are the columns of V.
    let mut w: Array2<T> = a.t().as_standard_layout().to_owned();
    let mut v: Array2<T> = Array2::eye(m);
    let tol = T::epsilon() * T::lit(2.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q);
                    (wp.dot(&wp), wq.dot(&wq), wp.dot(&wq))
                };
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = w.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Array2::zeros((n, m));
    let mut s = Array1::zeros(m);
    let mut vt = Array2::zeros((m, m));
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s[k] = sigma;
        if sigma > T::zero() {
            let inv = T::one() / sigma;
            u.column_mut(k).assign(&w.row(j).mapv(|x| x * inv));
        }
        vt.row_mut(k).assign(&v.row(j));
    }
    Svd { u, s, vt }
}

fn rotate_rows<T: Scalar>(a: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    let cols = a.ncols();
    let data = a.as_slice_mut().expect("standard layout");
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes `a`; `None` when a pivot falls below `rel_tol` times the largest
    /// absolute entry of `a`.
    pub fn new(a: &Array2<T>, rel_tol: T) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let scale = a.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if scale == T::zero() {
            return None;
        }
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[[i, k]].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= rel_tol * scale {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    lu.swap([k, j], [piv, j]);
                }
                perm.swap(k, piv);
            }
            let d = lu[[k, k]];
            for i in (k + 1)..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let v = lu[[k, j]];
                        lu[[i, j]] -= f * v;
                    }
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// columns. Only the upper triangle is trusted to be symmetric with the lower.
pub fn sym_eigen<T: Scalar>(a: &Array2<T>) -> (Vec<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigen-decomposition needs a square matrix");
    let mut m = a.to_owned();
    let mut v: Array2<T> = Array2::eye(n);
    let two = T::lit(2.0);
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (values, vectors)
}

/// Frobenius norm.
pub fn frobenius<T: Scalar>(a: &Array2<T>) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}
