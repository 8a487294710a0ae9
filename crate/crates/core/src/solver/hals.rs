//! Column subproblems of HALS.
//!
//! For column `r` of mode A the subproblem is
//! `min ‖W ∘ (X⁽ʳ⁾ − a ∘ b_r ∘ c_r)‖² + α aᵀQ₁a`, whose stationarity condition
//! is `M a = rhs` with `M = diag(W²₍₁₎ (c_r⊗b_r)²) + αQ₁` and
//! `rhs = (W²₍₁₎ ∘ X⁽ʳ⁾₍₁₎)(c_r⊗b_r)`. The solution is projected on the
//! nonnegative orthant and rescaled to `vᵀa = 1`; the scale is returned so
//! the caller can fold it into `c_r`. Modes B and C are analogous, C with
//! no penalty and no normalization.

use ndarray::{Array1, Array2};

use super::ModeConstraint;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::scalar::{positive_part, Scalar};
use crate::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    A,
    B,
    C,
}

/// Diagonal of the Gram term and the right-hand side `Σ W² t · u v` for the
/// given mode, where `(u, v)` are the columns of the two other modes in
/// increasing mode order.
pub(crate) fn moments_vec<T: Scalar>(
    mode: Mode,
    w2: &Tensor3<T>,
    t: &Tensor3<T>,
    u: &[T],
    v: &[T],
) -> (Array1<T>, Array1<T>) {
    let (ni, nk, nm) = w2.dims();
    let len = match mode {
        Mode::A => ni,
        Mode::B => nk,
        Mode::C => nm,
    };
    let mut diag = Array1::<T>::zeros(len);
    let mut rhs = Array1::<T>::zeros(len);
    let ws = w2.as_slice();
    let ts = t.as_slice();
    for m in 0..nm {
        for k in 0..nk {
            let base = ni * (k + nk * m);
            match mode {
                Mode::A => {
                    let p = u[k] * v[m];
                    if p == T::zero() {
                        continue;
                    }
                    let p2 = p * p;
                    for i in 0..ni {
                        let wv = ws[base + i];
                        diag[i] += wv * p2;
                        rhs[i] += wv * ts[base + i] * p;
                    }
                }
                Mode::B => {
                    let cm = v[m];
                    if cm == T::zero() {
                        continue;
                    }
                    let (mut d, mut s) = (T::zero(), T::zero());
                    for i in 0..ni {
                        let p = u[i] * cm;
                        let wv = ws[base + i];
                        d += wv * p * p;
                        s += wv * ts[base + i] * p;
                    }
                    diag[k] += d;
                    rhs[k] += s;
                }
                Mode::C => {
                    let bk = v[k];
                    if bk == T::zero() {
                        continue;
                    }
                    let (mut d, mut s) = (T::zero(), T::zero());
                    for i in 0..ni {
                        let p = u[i] * bk;
                        let wv = ws[base + i];
                        d += wv * p * p;
                        s += wv * ts[base + i] * p;
                    }
                    diag[m] += d;
                    rhs[m] += s;
                }
            }
        }
    }
    (diag, rhs)
}

pub(crate) fn moments<T: Scalar>(
    mode: Mode,
    w2: &Tensor3<T>,
    t: &Tensor3<T>,
    a: &Array2<T>,
    b: &Array2<T>,
    c: &Array2<T>,
    r: usize,
) -> (Array1<T>, Array1<T>) {
    let (ac, bc, cc) = (a.column(r).to_vec(), b.column(r).to_vec(), c.column(r).to_vec());
    match mode {
        Mode::A => moments_vec(mode, w2, t, &bc, &cc),
        Mode::B => moments_vec(mode, w2, t, &ac, &cc),
        Mode::C => moments_vec(mode, w2, t, &ac, &bc),
    }
}

/// Outcome of one A or B column update.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnUpdate<T> {
    /// Solution of `M x = rhs` before projection.
    pub unclipped: Array1<T>,
    /// New column: `[x]₊ / vᵀ[x]₊`, or the uniform column when `dead`.
    pub column: Array1<T>,
    /// `vᵀ[x]₊`; the caller multiplies `c_r` by it so the rank-one term is
    /// `[x]₊ ∘ …` unchanged by the normalization. 1 when `dead`.
    pub scale: T,
    /// The projection removed every positive entry.
    pub dead: bool,
}

/// Solves `(diag + weight·Q) x = rhs` (zero diagonal entries regularized by
/// `eps_div`), projects and normalizes.
pub(crate) fn solve_and_project<T: Scalar>(
    diag: &mut Array1<T>,
    rhs: &Array1<T>,
    constraint: &ModeConstraint<T>,
    eps_div: T,
) -> Result<ColumnUpdate<T>> {
    for d in diag.iter_mut() {
        if *d == T::zero() {
            *d = eps_div;
        }
    }
    let unclipped = match &constraint.q {
        Some(q) if constraint.weight != T::zero() => {
            let n = diag.len();
            let mut m = q.mapv(|x| x * constraint.weight);
            for i in 0..n {
                m[[i, i]] += diag[i];
            }
            match solve_spd(&m, rhs) {
                Ok(x) => x,
                Err(Error::NotPositiveDefinite) => {
                    let bump = diag.iter().fold(T::zero(), |acc, &d| acc.max(d)) * eps_div;
                    for i in 0..n {
                        m[[i, i]] += bump.max(eps_div);
                    }
                    solve_spd(&m, rhs)?
                }
                Err(e) => return Err(e),
            }
        }
        _ => rhs / &*diag,
    };
    let clipped = unclipped.mapv(positive_part);
    let scale: T = clipped.iter().zip(constraint.v.iter()).map(|(&x, &w)| x * w).sum();
    if scale > T::zero() && scale.is_finite() {
        let column = clipped.mapv(|x| x / scale);
        Ok(ColumnUpdate {
            unclipped,
            column,
            scale,
            dead: false,
        })
    } else {
        Ok(ColumnUpdate {
            unclipped,
            column: constraint.uniform_column(),
            scale: T::one(),
            dead: true,
        })
    }
}

/// Closed-form C update: `max(rhs/diag, 0)`, with 0 where `diag = 0`.
pub(crate) fn diagonal_project<T: Scalar>(diag: &Array1<T>, rhs: &Array1<T>) -> Array1<T> {
    Array1::from_shape_fn(diag.len(), |m| {
        if diag[m] > T::zero() {
            positive_part(rhs[m] / diag[m])
        } else {
            T::zero()
        }
    })
}

fn squared<T: Scalar>(w: &Tensor3<T>) -> Tensor3<T> {
    Tensor3::from_vec(w.dims(), w.as_slice().iter().map(|&v| v * v).collect())
        .expect("same length")
}

fn check_update_dims<T: Scalar>(
    w: &Tensor3<T>,
    partial: &Tensor3<T>,
    lens: (usize, usize, usize),
) -> Result<()> {
    if w.dims() != partial.dims() || w.dims() != lens {
        return Err(Error::DimensionMismatch(format!(
            "W {:?}, X⁽ʳ⁾ {:?}, factor lengths {:?}",
            w.dims(),
            partial.dims(),
            lens
        )));
    }
    Ok(())
}

/// Mode-1 column update from the partial residual
/// `X⁽ʳ⁾ = X − Σ_{s≠r} a_s∘b_s∘c_s`.
pub fn hals_update_a<T: Scalar>(
    w: &Tensor3<T>,
    partial: &Tensor3<T>,
    b: &[T],
    c: &[T],
    constraint: &ModeConstraint<T>,
    eps_div: T,
) -> Result<ColumnUpdate<T>> {
    check_update_dims(w, partial, (constraint.len(), b.len(), c.len()))?;
    let (mut diag, rhs) = moments_vec(Mode::A, &squared(w), partial, b, c);
    solve_and_project(&mut diag, &rhs, constraint, eps_div)
}

/// Mode-2 analogue of [`hals_update_a`].
pub fn hals_update_b<T: Scalar>(
    w: &Tensor3<T>,
    partial: &Tensor3<T>,
    a: &[T],
    c: &[T],
    constraint: &ModeConstraint<T>,
    eps_div: T,
) -> Result<ColumnUpdate<T>> {
    check_update_dims(w, partial, (a.len(), constraint.len(), c.len()))?;
    let (mut diag, rhs) = moments_vec(Mode::B, &squared(w), partial, a, c);
    solve_and_project(&mut diag, &rhs, constraint, eps_div)
}

/// Mode-3 update: entrywise `max(rhs/diag, 0)`; rows without weight get 0.
pub fn hals_update_c<T: Scalar>(
    w: &Tensor3<T>,
    partial: &Tensor3<T>,
    a: &[T],
    b: &[T],
) -> Result<Array1<T>> {
    check_update_dims(w, partial, (a.len(), b.len(), w.dims().2))?;
    let (diag, rhs) = moments_vec(Mode::C, &squared(w), partial, a, b);
    Ok(diagonal_project(&diag, &rhs))
}
