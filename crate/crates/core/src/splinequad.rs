//! Exact quadrature weights and curvature penalties for cubic splines
//! represented by their values at the knots.
//!
//! For a cubic spline `s` interpolating values `g` on a grid, both the
//! integral `∫s` and the roughness `∫(s″)²` are functionals of `g` alone:
//! `∫s = vᵀg` and `∫(s″)² = gᵀQg`. This module builds `(v, Q)` for natural
//! splines on `[t₁, t_K]` and for periodic splines on `[0, P)`.
//!
//! Both constructions go through the knot second derivatives `γ`, which
//! satisfy the tridiagonal (cyclic, for the periodic case) system `Rγ = Dg`
//! with `R` the overlap matrix `h/6, (h₋+h₊)/3, h/6` and `D` the second
//! divided-difference operator. Then `∫(s″)² = γᵀRγ = gᵀDᵀR⁻¹Dg` and each
//! interval contributes `h(gᵢ+gᵢ₊₁)/2 − h³(γᵢ+γᵢ₊₁)/24` to the integral.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::solve_spd_columns;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplineKind<T> {
    /// Zero second derivative at both boundary knots.
    Natural,
    /// Value and first two derivatives continuous across the wrap at `period`.
    Periodic { period: T },
}

/// Integral weights and curvature-penalty matrix for one spline class on
/// one grid.
#[derive(Debug, Clone)]
pub struct SplineSystem<T> {
    grid: Vec<T>,
    kind: SplineKind<T>,
    v: Array1<T>,
    q: Array2<T>,
}

fn check_increasing<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("knots must be finite".into()));
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidGrid(format!(
                "knots must be strictly increasing (knot {} = {} after {})",
                i + 1,
                w[1],
                w[0]
            )));
        }
    }
    Ok(())
}

/// Assembles `(v, Q)` from spacings `h`, the `n × p` operator `Dᵀ`, the
/// `p × p` overlap matrix and per-unknown correction weights.
fn assemble<T: Scalar>(
    trapezoid: Array1<T>,
    d_t: Array2<T>,
    overlap: Array2<T>,
    correction: Array1<T>,
) -> Result<(Array1<T>, Array2<T>)> {
    let n = d_t.nrows();
    if d_t.ncols() == 0 {
        return Ok((trapezoid, Array2::zeros((n, n))));
    }
    // R⁻¹D, one column per knot value.
    let d = d_t.t().to_owned();
    let rinv_d = solve_spd_columns(&overlap, &d)?;
    let mut q = d_t.dot(&rinv_d);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (q[[i, j]] + q[[j, i]]) * T::lit(0.5);
            q[[i, j]] = avg;
            q[[j, i]] = avg;
        }
    }
    // vᵀg = trapᵀg − cᵀγ = trapᵀg − cᵀR⁻¹Dg.
    let v = trapezoid - &rinv_d.t().dot(&correction);
    Ok((v, q))
}

impl<T: Scalar> SplineSystem<T> {
    /// System for natural cubic splines on the knots `grid` (K ≥ 2).
    pub fn natural(grid: &[T]) -> Result<Self> {
        let k = grid.len();
        if k < 2 {
            return Err(Error::InvalidGrid(format!(
                "natural spline needs at least 2 knots, got {k}"
            )));
        }
        check_increasing(grid)?;
        let h: Vec<T> = grid.windows(2).map(|w| w[1] - w[0]).collect();
        let half = T::lit(0.5);
        let mut trapezoid = Array1::<T>::zeros(k);
        for (i, &hi) in h.iter().enumerate() {
            trapezoid[i] += hi * half;
            trapezoid[i + 1] += hi * half;
        }
        // Interior unknowns γ₁..γ_{K−2}; γ₀ = γ_{K−1} = 0.
        let p = k - 2;
        let mut d_t = Array2::<T>::zeros((k, p));
        let mut overlap = Array2::<T>::zeros((p, p));
        let mut correction = Array1::<T>::zeros(p);
        let (three, six, c24) = (T::lit(3.0), T::lit(6.0), T::lit(24.0));
        for j in 0..p {
            let (hl, hr) = (h[j], h[j + 1]);
            d_t[[j, j]] = T::one() / hl;
            d_t[[j + 1, j]] = -T::one() / hl - T::one() / hr;
            d_t[[j + 2, j]] = T::one() / hr;
            overlap[[j, j]] = (hl + hr) / three;
            if j + 1 < p {
                overlap[[j, j + 1]] = hr / six;
                overlap[[j + 1, j]] = hr / six;
            }
            correction[j] = (hl * hl * hl + hr * hr * hr) / c24;
        }
        let (v, q) = assemble(trapezoid, d_t, overlap, correction)?;
        Ok(Self {
            grid: grid.to_vec(),
            kind: SplineKind::Natural,
            v,
            q,
        })
    }

    /// System for `period`-periodic cubic splines on knots in `[0, period)`
    /// (I ≥ 3). The wrap spacing `period − last + first` is derived here.
    pub fn periodic(grid: &[T], period: T) -> Result<Self> {
        let n = grid.len();
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "periodic spline needs at least 3 knots, got {n}"
            )));
        }
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        check_increasing(grid)?;
        if let Some(bad) = grid.iter().find(|&&x| x < T::zero() || x >= period) {
            return Err(Error::InvalidGrid(format!(
                "knot {bad} lies outside [0, {period})"
            )));
        }
        let h: Vec<T> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    grid[i + 1] - grid[i]
                } else {
                    period - grid[n - 1] + grid[0]
                }
            })
            .collect();
        let half = T::lit(0.5);
        let mut trapezoid = Array1::<T>::zeros(n);
        for i in 0..n {
            trapezoid[i] += h[i] * half;
            trapezoid[(i + 1) % n] += h[i] * half;
        }
        let mut d_t = Array2::<T>::zeros((n, n));
        let mut overlap = Array2::<T>::zeros((n, n));
        let mut correction = Array1::<T>::zeros(n);
        let (three, six, c24) = (T::lit(3.0), T::lit(6.0), T::lit(24.0));
        for j in 0..n {
            let prev = (j + n - 1) % n;
            let next = (j + 1) % n;
            let (hl, hr) = (h[prev], h[j]);
            d_t[[prev, j]] += T::one() / hl;
            d_t[[j, j]] += -T::one() / hl - T::one() / hr;
            d_t[[next, j]] += T::one() / hr;
            overlap[[j, j]] += (hl + hr) / three;
            overlap[[j, next]] += hr / six;
            overlap[[next, j]] += hr / six;
            correction[j] = (hl * hl * hl + hr * hr * hr) / c24;
        }
        let (v, q) = assemble(trapezoid, d_t, overlap, correction)?;
        Ok(Self {
            grid: grid.to_vec(),
            kind: SplineKind::Periodic { period },
            v,
            q,
        })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn kind(&self) -> SplineKind<T> {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Integral weights `v`.
    pub fn weights(&self) -> &Array1<T> {
        &self.v
    }

    /// Curvature-penalty matrix `Q`.
    pub fn penalty_matrix(&self) -> &Array2<T> {
        &self.q
    }

    fn check_len(&self, g: &[T]) -> Result<()> {
        if g.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "spline system has {} knots, vector has {} entries",
                self.len(),
                g.len()
            )));
        }
        Ok(())
    }

    /// `∫s = vᵀg` for the interpolating spline through `g`.
    pub fn integral(&self, g: &[T]) -> Result<T> {
        self.check_len(g)?;
        Ok(self.v.iter().zip(g).map(|(&a, &b)| a * b).sum())
    }

    /// `∫(s″)² = gᵀQg`, with round-off negatives clamped to zero.
    pub fn penalty(&self, g: &[T]) -> Result<T> {
        self.check_len(g)?;
        Ok(self.quadratic_form(g))
    }

    pub(crate) fn quadratic_form(&self, g: &[T]) -> T {
        clamped_quadratic_form(&self.q, g)
    }
}

/// `gᵀQg`, with negatives below `1e-12·‖Q‖·‖g‖²` (round-off) clamped to 0.
pub(crate) fn clamped_quadratic_form<T: Scalar>(q: &Array2<T>, g: &[T]) -> T {
    let n = g.len();
    let mut total = T::zero();
    let mut qmax = T::zero();
    for i in 0..n {
        let mut row = T::zero();
        for j in 0..n {
            let qij = q[[i, j]];
            qmax = qmax.max(qij.abs());
            row += qij * g[j];
        }
        total += g[i] * row;
    }
    if total < T::zero() {
        let gsq: T = g.iter().map(|&x| x * x).sum();
        let threshold = T::lit(1e-12) * qmax * T::from_usize_lossy(n) * gsq;
        if -total <= threshold {
            return T::zero();
        }
    }
    total
}
