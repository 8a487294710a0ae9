//! Small dense linear-algebra kernels: Cholesky solves, a cyclic Jacobi
//! eigensolver for symmetric matrices, and block subspace iteration for the
//! leading left singular vectors of a wide matrix.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
pub fn cholesky<T: Scalar>(m: &Array2<T>) -> Result<Array2<T>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of non-square {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = m[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = m[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve<T: Scalar>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for p in 0..i {
            s -= l[[i, p]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in (i + 1)..n {
            s -= l[[p, i]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves the symmetric positive-definite system `M x = b`.
pub fn solve_spd<T: Scalar>(m: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    let l = cholesky(m)?;
    Ok(cholesky_solve(&l, b))
}

/// Solves `M X = B` column by column for symmetric positive-definite `M`.
pub fn solve_spd_columns<T: Scalar>(m: &Array2<T>, b: &Array2<T>) -> Result<Array2<T>> {
    let l = cholesky(m)?;
    let mut out = Array2::<T>::zeros(b.raw_dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let x = cholesky_solve(&l, &col.to_owned());
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen<T: Scalar>(m: &Array2<T>) -> (Vec<T>, Array2<T>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += a[[i, i]] * a[[i, i]];
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
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
    order.sort_by(|&i, &j| {
        a[[j, j]]
            .partial_cmp(&a[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

fn random_column<T: Scalar, G: Rng + ?Sized>(rng: &mut G, n: usize) -> Array1<T> {
    Array1::from_shape_fn(n, |_| {
        let z: f64 = rng.sample(StandardNormal);
        T::lit(z)
    })
}

/// Orthonormalizes the columns of `q` in place by modified Gram-Schmidt,
/// replacing columns that collapse to (numerically) zero with fresh random
/// directions.
fn orthonormalize<T: Scalar, G: Rng + ?Sized>(q: &mut Array2<T>, rng: &mut G) {
    let (n, r) = q.dim();
    let tiny = T::epsilon() * T::lit(1e3);
    for j in 0..r {
        let mut attempts = 0;
        loop {
            let scale = q.column(j).iter().fold(T::zero(), |m, x| m.max(x.abs()));
            for p in 0..j {
                let dot = q.column(p).dot(&q.column(j));
                let qp = q.column(p).to_owned();
                q.column_mut(j).scaled_add(-dot, &qp);
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            if norm > tiny * scale.max(T::min_positive_value()) && norm > T::zero() {
                q.column_mut(j).mapv_inplace(|x| x / norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 50, "unable to complete an orthonormal basis");
            let fresh = random_column::<T, G>(rng, n);
            q.column_mut(j).assign(&fresh);
        }
    }
}

/// Leading `r` left singular vectors and singular values of `y` (p × q).
///
/// Block subspace iteration on `Y Yᵀ` with a Rayleigh-Ritz step each
/// iteration. Requires `r ≤ p`. Singular values come back in descending
/// order; directions for (numerically) zero singular values are arbitrary
/// orthonormal completions.
pub fn leading_left_singular<T: Scalar, G: Rng + ?Sized>(
    y: ArrayView2<'_, T>,
    r: usize,
    rng: &mut G,
) -> (Array2<T>, Vec<T>) {
    let p = y.nrows();
    assert!(r <= p, "requested {r} singular vectors of a {p}-row matrix");
    let mut q = Array2::<T>::zeros((p, r));
    for j in 0..r {
        q.column_mut(j).assign(&random_column::<T, G>(rng, p));
    }
    orthonormalize(&mut q, rng);
    let mut values = vec![T::zero(); r];
    let tol = T::epsilon().sqrt() * T::lit(1e-4);
    for _ in 0..500 {
        let z = y.dot(&y.t().dot(&q));
        let mut qn = z;
        orthonormalize(&mut qn, rng);
        let proj = y.t().dot(&qn);
        let h = proj.t().dot(&proj);
        let (evals, evecs) = symmetric_eigen(&h);
        let qn = qn.dot(&evecs);
        let mut change = T::zero();
        for j in 0..r {
            let c = q.column(j).dot(&qn.column(j)).abs();
            change = change.max(T::one() - c);
        }
        q = qn;
        values = evals.iter().map(|&e| e.max(T::zero()).sqrt()).collect();
        if change < tol {
            break;
        }
    }
    (q, values)
}
