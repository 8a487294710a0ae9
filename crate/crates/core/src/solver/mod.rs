//! Fast HALS for the spline-penalized weighted nonnegative tensor
//! factorization, and the unpenalized NTF baseline.
//!
//! The model approximates `X ≈ Σ_r a_r ∘ b_r ∘ c_r` under weights `W` and
//! minimizes `‖W ∘ (X − Σ_r a_r∘b_r∘c_r)‖² + α Σ aᵀQ₁a + β Σ bᵀQ₂b` with all
//! factors nonnegative and `v₁ᵀa_r = v₂ᵀb_r = 1`.

mod hals;
mod init;

pub use hals::{hals_update_a, hals_update_b, hals_update_c, ColumnUpdate};
pub use init::init_svd_positive;

use log::debug;
use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::WeightedTensorPair;
use crate::scalar::Scalar;
use crate::splinequad::{clamped_quadratic_form, SplineSystem};
use crate::tensor::Tensor3;

use hals::{solve_and_project, Mode};

/// Factor matrices: `a` is I×R, `b` is K×R, `c` is M×R (M = E·N for the
/// smooth model, with row `e·N + n` holding site `n` under regime `e`).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
    pub c: Array2<T>,
}

impl<T: Scalar> FactorSet<T> {
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    /// `Σ_r a_r ∘ b_r ∘ c_r`.
    pub fn reconstruct(&self) -> Tensor3<T> {
        let mut out = Tensor3::zeros(self.dims());
        for r in 0..self.rank() {
            add_rank1(&mut out, &self.a, &self.b, &self.c, r, T::one());
        }
        out
    }

    pub fn all_nonnegative(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter())
            .chain(self.c.iter())
            .all(|&x| x >= T::zero())
    }

    /// Largest `|vᵀcol − 1|` over the columns of `a` and `b`.
    pub fn max_normalization_error(&self, v_a: &[T], v_b: &[T]) -> T {
        let mut worst = T::zero();
        for (mat, v) in [(&self.a, v_a), (&self.b, v_b)] {
            for col in mat.columns() {
                let s: T = col.iter().zip(v).map(|(&x, &w)| x * w).sum();
                worst = worst.max((s - T::one()).abs());
            }
        }
        worst
    }

    fn first_non_finite(&self) -> Option<String> {
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("C", &self.c)] {
            for (r, col) in mat.columns().into_iter().enumerate() {
                if col.iter().any(|x| !x.is_finite()) {
                    return Some(format!("factor {name}, column {}", r + 1));
                }
            }
        }
        None
    }
}

/// Adds `scale · a_r ∘ b_r ∘ c_r` into `out`.
fn add_rank1<T: Scalar>(
    out: &mut Tensor3<T>,
    a: &Array2<T>,
    b: &Array2<T>,
    c: &Array2<T>,
    r: usize,
    scale: T,
) {
    add_outer(
        out,
        &a.column(r).to_vec(),
        &b.column(r).to_vec(),
        &c.column(r).to_vec(),
        scale,
    );
}

/// Adds `scale · a ∘ b ∘ c` into `out`.
fn add_outer<T: Scalar>(out: &mut Tensor3<T>, a: &[T], b: &[T], c: &[T], scale: T) {
    let (ni, nk, nm) = out.dims();
    let data = out.as_mut_slice();
    for m in 0..nm {
        let cm = c[m] * scale;
        if cm == T::zero() {
            continue;
        }
        for k in 0..nk {
            let bc = b[k] * cm;
            if bc == T::zero() {
                continue;
            }
            let base = ni * (k + nk * m);
            for i in 0..ni {
                data[base + i] += a[i] * bc;
            }
        }
    }
}

/// Per-mode constraint data: integral weights `v` (columns are normalized to
/// `vᵀcol = 1`) and an optional penalty `weight · colᵀQcol`.
#[derive(Debug, Clone)]
pub struct ModeConstraint<T> {
    pub v: Array1<T>,
    pub q: Option<Array2<T>>,
    pub weight: T,
}

impl<T: Scalar> ModeConstraint<T> {
    pub fn from_spline(system: &SplineSystem<T>, weight: T) -> Self {
        Self {
            v: system.weights().clone(),
            q: Some(system.penalty_matrix().clone()),
            weight,
        }
    }

    /// Sum-to-one columns and no penalty.
    pub fn simplex(len: usize) -> Self {
        Self {
            v: Array1::from_elem(len, T::one()),
            q: None,
            weight: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    fn penalty(&self, mat: &Array2<T>) -> T {
        match &self.q {
            Some(q) if self.weight != T::zero() => {
                let mut total = T::zero();
                for col in mat.columns() {
                    total += clamped_quadratic_form(q, &col.to_vec());
                }
                self.weight * total
            }
            _ => T::zero(),
        }
    }

    fn uniform_column(&self) -> Array1<T> {
        let total: T = self.v.iter().copied().sum();
        let level = if total > T::zero() {
            T::one() / total
        } else {
            T::one()
        };
        Array1::from_elem(self.v.len(), level)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig<T> {
    pub rank: usize,
    pub alpha: T,
    pub beta: T,
    /// Stop once the relative objective improvement of a sweep drops below this.
    pub tol: T,
    pub max_sweeps: usize,
    pub seed: u64,
    pub eps_div: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            rank: 6,
            alpha: T::lit(3000.0),
            beta: T::lit(3000.0),
            tol: T::lit(1e-5),
            max_sweeps: 500,
            seed: 0,
            eps_div: T::lit(1e-12),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.alpha >= T::zero()) || !(self.beta >= T::zero()) {
            return Err(Error::InvalidConfig("alpha and beta must be nonnegative".into()));
        }
        if !(self.eps_div > T::zero()) {
            return Err(Error::InvalidConfig("eps_div must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms<T> {
    pub loss: T,
    pub penalty: T,
    pub total: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxSweeps,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    A,
    B,
}

/// A column clipped to all zeros and reset (or frozen) during the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnEvent {
    pub sweep: usize,
    pub mode: FactorMode,
    pub component: usize,
    pub frozen: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport<T> {
    /// Objective before the first sweep followed by one entry per sweep.
    pub trace: Vec<ObjectiveTerms<T>>,
    pub sweeps: usize,
    pub termination: Termination,
    /// Sweep whose iterate is returned (0 = initialization).
    pub best_sweep: usize,
    pub within_bin_variance: T,
    pub column_events: Vec<ColumnEvent>,
}

impl<T: Scalar> FitReport<T> {
    pub fn final_terms(&self) -> ObjectiveTerms<T> {
        self.trace[self.best_sweep]
    }
}

/// State handed to sweep observers: sweep 0 is the initialization.
pub struct SweepState<'a, T> {
    pub sweep: usize,
    pub factors: &'a FactorSet<T>,
    pub terms: ObjectiveTerms<T>,
}

fn check_dims<T: Scalar>(
    w: &Tensor3<T>,
    x: &Tensor3<T>,
    f: &FactorSet<T>,
    mode_a: &ModeConstraint<T>,
    mode_b: &ModeConstraint<T>,
) -> Result<()> {
    let dims = x.dims();
    if w.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "W dims {:?} vs X dims {:?}",
            w.dims(),
            dims
        )));
    }
    let r = f.rank();
    if f.dims() != dims || f.b.ncols() != r || f.c.ncols() != r {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {:?} vs tensor dims {:?}",
            f.dims(),
            dims
        )));
    }
    if mode_a.len() != dims.0 || mode_b.len() != dims.1 {
        return Err(Error::DimensionMismatch(format!(
            "constraint lengths ({}, {}) vs tensor dims {:?}",
            mode_a.len(),
            mode_b.len(),
            dims
        )));
    }
    Ok(())
}

fn weighted_loss<T: Scalar>(w: &Tensor3<T>, residual: &Tensor3<T>) -> T {
    w.as_slice()
        .iter()
        .zip(residual.as_slice())
        .map(|(&wv, &e)| {
            let d = wv * e;
            d * d
        })
        .sum()
}

fn objective_with<T: Scalar>(
    w: &Tensor3<T>,
    x: &Tensor3<T>,
    f: &FactorSet<T>,
    mode_a: &ModeConstraint<T>,
    mode_b: &ModeConstraint<T>,
) -> Result<ObjectiveTerms<T>> {
    check_dims(w, x, f, mode_a, mode_b)?;
    let residual = residual_of(x, f);
    let loss = weighted_loss(w, &residual);
    let penalty = mode_a.penalty(&f.a) + mode_b.penalty(&f.b);
    Ok(ObjectiveTerms {
        loss,
        penalty,
        total: loss + penalty,
    })
}

fn residual_of<T: Scalar>(x: &Tensor3<T>, f: &FactorSet<T>) -> Tensor3<T> {
    let mut residual = x.clone();
    for r in 0..f.rank() {
        add_rank1(&mut residual, &f.a, &f.b, &f.c, r, -T::one());
    }
    residual
}

/// `L = ‖W ∘ (X − Σ_r a_r∘b_r∘c_r)‖²`, `P = α Tr(AᵀQ₁A) + β Tr(BᵀQ₂B)`.
pub fn objective<T: Scalar>(
    w: &Tensor3<T>,
    x: &Tensor3<T>,
    factors: &FactorSet<T>,
    intraday: &SplineSystem<T>,
    thermal: &SplineSystem<T>,
    alpha: T,
    beta: T,
) -> Result<ObjectiveTerms<T>> {
    objective_with(
        w,
        x,
        factors,
        &ModeConstraint::from_spline(intraday, alpha),
        &ModeConstraint::from_spline(thermal, beta),
    )
}

/// Fits the smooth model to an assembled tensor pair.
pub fn fit<T: Scalar>(
    pair: &WeightedTensorPair<T>,
    intraday: &SplineSystem<T>,
    thermal: &SplineSystem<T>,
    cfg: &SolverConfig<T>,
) -> Result<(FactorSet<T>, FitReport<T>)> {
    fit_observed(pair, intraday, thermal, cfg, |_| {})
}

/// [`fit`] with a callback invoked on the initialization and after every
/// sweep.
pub fn fit_observed<T: Scalar>(
    pair: &WeightedTensorPair<T>,
    intraday: &SplineSystem<T>,
    thermal: &SplineSystem<T>,
    cfg: &SolverConfig<T>,
    observer: impl FnMut(&SweepState<'_, T>),
) -> Result<(FactorSet<T>, FitReport<T>)> {
    let mode_a = ModeConstraint::from_spline(intraday, cfg.alpha);
    let mode_b = ModeConstraint::from_spline(thermal, cfg.beta);
    run_hals(
        &pair.w,
        &pair.x,
        &mode_a,
        &mode_b,
        cfg,
        pair.within_bin_variance,
        observer,
    )
}

/// Plain NTF over (time, day, site) with unit weights, no penalty and
/// sum-to-one columns in the first two modes. `alpha`/`beta` in `cfg` are
/// ignored.
pub fn fit_baseline_ntf<T: Scalar>(
    day_tensor: &Tensor3<T>,
    cfg: &SolverConfig<T>,
) -> Result<(FactorSet<T>, FitReport<T>)> {
    let w = Tensor3::filled(day_tensor.dims(), T::one());
    fit_baseline_ntf_weighted(&w, day_tensor, cfg)
}

/// Baseline NTF with a weight tensor (typically 0/1 for missing days).
pub fn fit_baseline_ntf_weighted<T: Scalar>(
    w: &Tensor3<T>,
    day_tensor: &Tensor3<T>,
    cfg: &SolverConfig<T>,
) -> Result<(FactorSet<T>, FitReport<T>)> {
    let (ni, nj, _) = day_tensor.dims();
    run_hals(
        w,
        day_tensor,
        &ModeConstraint::simplex(ni),
        &ModeConstraint::simplex(nj),
        cfg,
        T::zero(),
        |_| {},
    )
}

const MAX_RESETS: usize = 2;

/// The shared Fast HALS engine.
pub fn run_hals<T: Scalar>(
    w: &Tensor3<T>,
    x: &Tensor3<T>,
    mode_a: &ModeConstraint<T>,
    mode_b: &ModeConstraint<T>,
    cfg: &SolverConfig<T>,
    within_bin_variance: T,
    mut observer: impl FnMut(&SweepState<'_, T>),
) -> Result<(FactorSet<T>, FitReport<T>)> {
    cfg.validate()?;
    if w.dims() != x.dims() {
        return Err(Error::DimensionMismatch(format!(
            "W dims {:?} vs X dims {:?}",
            w.dims(),
            x.dims()
        )));
    }
    if !x.is_finite() || !w.is_finite() {
        return Err(Error::InvalidPanel("tensor entries must be finite".into()));
    }
    let rank = cfg.rank;
    let mut f = init_svd_positive(
        x,
        rank,
        mode_a.v.as_slice().expect("contiguous"),
        mode_b.v.as_slice().expect("contiguous"),
        cfg.seed,
    );
    check_dims(w, x, &f, mode_a, mode_b)?;

    let w2 = Tensor3::from_vec(w.dims(), w.as_slice().iter().map(|&v| v * v).collect())?;
    let mut residual = residual_of(x, &f);
    let penalty = mode_a.penalty(&f.a) + mode_b.penalty(&f.b);
    let loss = weighted_loss(w, &residual);
    let init_terms = ObjectiveTerms {
        loss,
        penalty,
        total: loss + penalty,
    };
    if !init_terms.total.is_finite() {
        return Err(Error::NonFinite {
            sweep: 0,
            context: f.first_non_finite().unwrap_or_else(|| "initialization".into()),
        });
    }
    observer(&SweepState {
        sweep: 0,
        factors: &f,
        terms: init_terms,
    });

    let mut trace = vec![init_terms];
    let mut best = f.clone();
    let mut best_sweep = 0;
    let mut best_total = init_terms.total;
    let mut resets = vec![[0usize; 2]; rank];
    let mut frozen = vec![false; rank];
    let mut events = Vec::new();
    let mut increases = 0;
    let mut termination = Termination::MaxSweeps;
    let mut sweeps = 0;

    for sweep in 1..=cfg.max_sweeps {
        for (mode, constraint) in [(Mode::A, mode_a), (Mode::B, mode_b)] {
            for r in 0..rank {
                if frozen[r] || f.c.column(r).iter().all(|&v| v == T::zero()) {
                    continue;
                }
                let dead = update_column(&mut f, &mut residual, &w2, mode, r, constraint, cfg.eps_div)?;
                if dead {
                    let slot = if mode == Mode::A { 0 } else { 1 };
                    resets[r][slot] += 1;
                    let freeze = resets[r][slot] > MAX_RESETS;
                    if freeze {
                        frozen[r] = true;
                        add_rank1(&mut residual, &f.a, &f.b, &f.c, r, T::one());
                        f.c.column_mut(r).fill(T::zero());
                    }
                    events.push(ColumnEvent {
                        sweep,
                        mode: if mode == Mode::A { FactorMode::A } else { FactorMode::B },
                        component: r,
                        frozen: freeze,
                    });
                }
            }
        }
        for r in 0..rank {
            if frozen[r] {
                continue;
            }
            update_c_column(&mut f, &mut residual, &w2, r);
        }

        residual = residual_of(x, &f);
        let loss = weighted_loss(w, &residual);
        let penalty = mode_a.penalty(&f.a) + mode_b.penalty(&f.b);
        let terms = ObjectiveTerms {
            loss,
            penalty,
            total: loss + penalty,
        };
        if !terms.total.is_finite() {
            return Err(Error::NonFinite {
                sweep,
                context: f
                    .first_non_finite()
                    .unwrap_or_else(|| "objective overflow".into()),
            });
        }
        trace.push(terms);
        sweeps = sweep;
        observer(&SweepState {
            sweep,
            factors: &f,
            terms,
        });
        debug!(
            "sweep {sweep}: loss {} penalty {} total {}",
            terms.loss, terms.penalty, terms.total
        );

        let prev = trace[sweep - 1].total;
        if terms.total < best_total {
            best_total = terms.total;
            best = f.clone();
            best_sweep = sweep;
        }
        if terms.total > prev {
            increases += 1;
            if increases >= 2 {
                termination = Termination::Stalled;
                break;
            }
            continue;
        }
        increases = 0;
        let rel = (prev - terms.total) / prev.max(cfg.eps_div);
        if rel < cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }
    if best_sweep != sweeps {
        debug!("returning iterate of sweep {best_sweep} (last sweep {sweeps})");
    }
    Ok((
        best,
        FitReport {
            trace,
            sweeps,
            termination,
            best_sweep,
            within_bin_variance,
            column_events: events,
        },
    ))
}

/// Updates column `r` of `a` or `b` in place, keeping `residual = X − model`
/// current. Returns `true` when the projected solution was all zeros and
/// the column was reset to uniform.
fn update_column<T: Scalar>(
    f: &mut FactorSet<T>,
    residual: &mut Tensor3<T>,
    w2: &Tensor3<T>,
    mode: Mode,
    r: usize,
    constraint: &ModeConstraint<T>,
    eps_div: T,
) -> Result<bool> {
    let old = match mode {
        Mode::A => f.a.column(r).to_owned(),
        _ => f.b.column(r).to_owned(),
    };
    let (mut diag, mut rhs) = hals::moments(mode, w2, residual, &f.a, &f.b, &f.c, r);
    for (rh, (&d, &o)) in rhs.iter_mut().zip(diag.iter().zip(old.iter())) {
        *rh += d * o;
    }
    let update = solve_and_project(&mut diag, &rhs, constraint, eps_div)?;
    // Residual change: (old − x₊) along this mode, with c_r at its old value.
    let delta: Vec<T> = if update.dead {
        (&old - &update.column).to_vec()
    } else {
        old.iter()
            .zip(update.column.iter())
            .map(|(&o, &n)| o - n * update.scale)
            .collect()
    };
    let c_r = f.c.column(r).to_vec();
    match mode {
        Mode::A => {
            add_outer(residual, &delta, &f.b.column(r).to_vec(), &c_r, T::one());
            f.a.column_mut(r).assign(&update.column);
        }
        _ => {
            add_outer(residual, &f.a.column(r).to_vec(), &delta, &c_r, T::one());
            f.b.column_mut(r).assign(&update.column);
        }
    }
    if !update.dead {
        f.c.column_mut(r).mapv_inplace(|v| v * update.scale);
    }
    Ok(update.dead)
}

fn update_c_column<T: Scalar>(
    f: &mut FactorSet<T>,
    residual: &mut Tensor3<T>,
    w2: &Tensor3<T>,
    r: usize,
) {
    let old = f.c.column(r).to_owned();
    let (diag, mut rhs) = hals::moments(Mode::C, w2, residual, &f.a, &f.b, &f.c, r);
    for (rh, (&d, &o)) in rhs.iter_mut().zip(diag.iter().zip(old.iter())) {
        *rh += d * o;
    }
    let new = hals::diagonal_project(&diag, &rhs);
    let delta: Vec<T> = old.iter().zip(new.iter()).map(|(&o, &n)| o - n).collect();
    add_outer(
        residual,
        &f.a.column(r).to_vec(),
        &f.b.column(r).to_vec(),
        &delta,
        T::one(),
    );
    f.c.column_mut(r).assign(&new);
}
