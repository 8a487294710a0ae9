//! Observed load panels and their reduction to the weighted tensor pair
//! `(W, X)` the solver works on.
//!
//! A panel holds daily curves `X_{j,n}(u_i)` for day `j`, site `n` and
//! intra-day time `u_i`, together with the day's mean temperature and its
//! consumption regime. Days sharing a (temperature bin, regime) cell at a
//! site collapse into one tensor fiber: `W` holds the square root of the day
//! count and `X` the average curve, so the weighted tensor loss differs from
//! the per-day loss only by the data-only within-bin variance.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::FactorSet;
use crate::splinequad::SplineSystem;
use crate::tensor::Tensor3;

/// Raw panel contents. `loads` is laid out `[(j·N + n)·I + i]`; regimes are
/// 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelParts<T> {
    pub intraday_grid: Vec<T>,
    pub sites: Vec<String>,
    pub days: Vec<String>,
    pub loads: Vec<T>,
    pub observed: Vec<bool>,
    pub temps: Option<Vec<T>>,
    pub regimes: Option<Vec<usize>>,
    pub regime_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadPanel<T> {
    intraday_grid: Vec<T>,
    sites: Vec<String>,
    days: Vec<String>,
    loads: Vec<T>,
    observed: Vec<bool>,
    temps: Option<Vec<T>>,
    regimes: Vec<usize>,
    regime_count: usize,
}

impl<T: Scalar> LoadPanel<T> {
    /// Validates the parts. A day with any non-finite load or a non-finite
    /// temperature is masked as a whole.
    pub fn new(parts: PanelParts<T>) -> Result<Self> {
        let PanelParts {
            intraday_grid,
            sites,
            days,
            loads,
            mut observed,
            temps,
            regimes,
            regime_count,
        } = parts;
        let (ni, nn, nj) = (intraday_grid.len(), sites.len(), days.len());
        if ni == 0 || nn == 0 || nj == 0 {
            return Err(Error::InvalidPanel(format!(
                "empty panel ({nj} days, {nn} sites, {ni} times)"
            )));
        }
        for w in intraday_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidPanel(
                    "intra-day grid must be strictly increasing".into(),
                ));
            }
        }
        let hours = T::lit(24.0);
        if intraday_grid
            .iter()
            .any(|&u| !u.is_finite() || u < T::zero() || u >= hours)
        {
            return Err(Error::InvalidPanel("intra-day times must lie in [0, 24)".into()));
        }
        if loads.len() != nj * nn * ni {
            return Err(Error::InvalidPanel(format!(
                "expected {} load values, got {}",
                nj * nn * ni,
                loads.len()
            )));
        }
        if observed.len() != nj * nn {
            return Err(Error::InvalidPanel("mask length must be days × sites".into()));
        }
        if regime_count == 0 {
            return Err(Error::InvalidPanel("regime count must be at least 1".into()));
        }
        if let Some(t) = &temps {
            if t.len() != nj * nn {
                return Err(Error::InvalidPanel("temperature length must be days × sites".into()));
            }
        }
        let regimes = match regimes {
            Some(r) => {
                if r.len() != nj * nn {
                    return Err(Error::InvalidPanel("regime length must be days × sites".into()));
                }
                r
            }
            None => vec![0; nj * nn],
        };
        for idx in 0..nj * nn {
            if !observed[idx] {
                continue;
            }
            let curve = &loads[idx * ni..(idx + 1) * ni];
            let temp_ok = temps.as_ref().is_none_or(|t| t[idx].is_finite());
            if !temp_ok || curve.iter().any(|x| !x.is_finite()) {
                observed[idx] = false;
                continue;
            }
            if regimes[idx] >= regime_count {
                return Err(Error::InvalidPanel(format!(
                    "regime {} of site `{}` on day `{}` outside 1..={}",
                    regimes[idx] + 1,
                    sites[idx % nn],
                    days[idx / nn],
                    regime_count
                )));
            }
        }
        Ok(Self {
            intraday_grid,
            sites,
            days,
            loads,
            observed,
            temps,
            regimes,
            regime_count,
        })
    }

    pub fn intraday_grid(&self) -> &[T] {
        &self.intraday_grid
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn days(&self) -> &[String] {
        &self.days
    }

    pub fn n_times(&self) -> usize {
        self.intraday_grid.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn regime_count(&self) -> usize {
        self.regime_count
    }

    pub fn has_temperatures(&self) -> bool {
        self.temps.is_some()
    }

    #[inline]
    fn slot(&self, day: usize, site: usize) -> usize {
        day * self.sites.len() + site
    }

    pub fn is_observed(&self, day: usize, site: usize) -> bool {
        self.observed[self.slot(day, site)]
    }

    /// Load curve of an observed day, `None` when masked.
    pub fn curve(&self, day: usize, site: usize) -> Option<&[T]> {
        let idx = self.slot(day, site);
        if !self.observed[idx] {
            return None;
        }
        let ni = self.n_times();
        Some(&self.loads[idx * ni..(idx + 1) * ni])
    }

    pub fn temperature(&self, day: usize, site: usize) -> Option<T> {
        let idx = self.slot(day, site);
        self.temps.as_ref().map(|t| t[idx])
    }

    /// 0-based regime index.
    pub fn regime(&self, day: usize, site: usize) -> usize {
        self.regimes[self.slot(day, site)]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Raw parts, e.g. for serialization.
    pub fn to_parts(&self) -> PanelParts<T> {
        PanelParts {
            intraday_grid: self.intraday_grid.clone(),
            sites: self.sites.clone(),
            days: self.days.clone(),
            loads: self.loads.clone(),
            observed: self.observed.clone(),
            temps: self.temps.clone(),
            regimes: Some(self.regimes.clone()),
            regime_count: self.regime_count,
        }
    }

    fn require_temps(&self) -> Result<&[T]> {
        self.temps
            .as_deref()
            .ok_or_else(|| Error::InvalidPanel("panel has no temperatures".into()))
    }
}

/// Divides every site's loads by its average daily consumption (mean over
/// observed days of the day's mean load). Returns the per-site scales.
pub fn normalize_by_daily_mean<T: Scalar>(panel: &LoadPanel<T>) -> Result<(LoadPanel<T>, Vec<T>)> {
    let (ni, nn, nj) = (panel.n_times(), panel.n_sites(), panel.n_days());
    let mut scales = Vec::with_capacity(nn);
    for n in 0..nn {
        let mut sum = T::zero();
        let mut days = 0usize;
        for j in 0..nj {
            if let Some(curve) = panel.curve(j, n) {
                sum += curve.iter().copied().sum::<T>() / T::from_usize_lossy(ni);
                days += 1;
            }
        }
        if days == 0 {
            return Err(Error::DegenerateSite {
                site: panel.sites[n].clone(),
                reason: "no observed days".into(),
            });
        }
        let scale = sum / T::from_usize_lossy(days);
        if !(scale.abs() > T::zero()) || !scale.is_finite() {
            return Err(Error::DegenerateSite {
                site: panel.sites[n].clone(),
                reason: format!("average daily consumption is {scale}"),
            });
        }
        scales.push(scale);
    }
    let mut out = panel.clone();
    for j in 0..nj {
        for n in 0..nn {
            let idx = panel.slot(j, n);
            for x in &mut out.loads[idx * ni..(idx + 1) * ni] {
                *x /= scales[n];
            }
        }
    }
    Ok((out, scales))
}

/// Sorted grid of rounded temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureGrid<T> {
    resolution: T,
    keys: Vec<i64>,
    values: Vec<T>,
}

impl<T: Scalar> TemperatureGrid<T> {
    fn key(resolution: T, t: T) -> Option<i64> {
        if !t.is_finite() {
            return None;
        }
        (t / resolution).round().to_i64()
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the grid point `t` rounds to, if present.
    pub fn bin(&self, t: T) -> Option<usize> {
        let key = Self::key(self.resolution, t)?;
        self.keys.binary_search(&key).ok()
    }
}

/// Rounds every observed temperature to the nearest multiple of
/// `resolution` and collects the distinct values. Requires at least two.
pub fn build_temperature_grid<T: Scalar>(
    panel: &LoadPanel<T>,
    resolution: T,
) -> Result<TemperatureGrid<T>> {
    if !(resolution > T::zero()) || !resolution.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "temperature resolution must be positive, got {resolution}"
        )));
    }
    let temps = panel.require_temps()?;
    let mut keys = Vec::new();
    for (idx, &t) in temps.iter().enumerate() {
        if !panel.observed[idx] {
            continue;
        }
        let key = TemperatureGrid::key(resolution, t)
            .ok_or_else(|| Error::InvalidPanel(format!("temperature {t} cannot be binned")))?;
        keys.push(key);
    }
    keys.sort_unstable();
    keys.dedup();
    if keys.len() < 2 {
        return Err(Error::GridTooCoarse(keys.len()));
    }
    let values = keys
        .iter()
        .map(|&k| T::from_i64(k).expect("grid key representable") * resolution)
        .collect();
    Ok(TemperatureGrid {
        resolution,
        keys,
        values,
    })
}

/// The `(W, X)` pair over (intra-day time, temperature bin, regime·site).
#[derive(Debug, Clone)]
pub struct WeightedTensorPair<T> {
    pub w: Tensor3<T>,
    pub x: Tensor3<T>,
    pub temp_grid: Vec<T>,
    pub n_sites: usize,
    pub regime_count: usize,
    /// `Σ (X_{j,n}(u_i) − cell average)²` over all observed days: the
    /// constant separating the per-day loss from the weighted tensor loss.
    pub within_bin_variance: T,
}

impl<T: Scalar> WeightedTensorPair<T> {
    /// Third-mode index of site `n` (0-based) under regime `e` (0-based).
    pub fn slab(&self, site: usize, regime: usize) -> usize {
        regime * self.n_sites + site
    }
}

/// Builds `W_{i,k,eN+n} = √count` and `X_{i,k,eN+n} = mean curve` over the
/// days of site `n` in temperature bin `k` and regime `e`. Empty cells have
/// `W = X = 0`.
pub fn assemble_tensors<T: Scalar>(
    panel: &LoadPanel<T>,
    grid: &TemperatureGrid<T>,
) -> Result<WeightedTensorPair<T>> {
    let temps = panel.require_temps()?;
    let (ni, nn, nj, ne) = (panel.n_times(), panel.n_sites(), panel.n_days(), panel.regime_count);
    let nk = grid.len();
    let dims = (ni, nk, ne * nn);
    let mut counts = vec![0usize; nk * ne * nn];
    let mut sums = Tensor3::<T>::zeros(dims);
    let mut cell_of = vec![usize::MAX; nj * nn];
    for j in 0..nj {
        for n in 0..nn {
            let Some(curve) = panel.curve(j, n) else { continue };
            let idx = panel.slot(j, n);
            let t = temps[idx];
            let k = grid.bin(t).ok_or(Error::OffGrid(t.to_f64_lossy()))?;
            let m = panel.regimes[idx] * nn + n;
            counts[k + nk * m] += 1;
            cell_of[idx] = k + nk * m;
            for (i, &x) in curve.iter().enumerate() {
                let at = sums.index(i, k, m);
                sums.as_mut_slice()[at] += x;
            }
        }
    }
    let mut w = Tensor3::zeros(dims);
    let mut x = Tensor3::zeros(dims);
    for m in 0..ne * nn {
        for k in 0..nk {
            let c = counts[k + nk * m];
            if c == 0 {
                continue;
            }
            let cf = T::from_usize_lossy(c);
            let wv = cf.sqrt();
            for i in 0..ni {
                w.set(i, k, m, wv);
                x.set(i, k, m, sums.get(i, k, m) / cf);
            }
        }
    }
    let mut within = T::zero();
    for (idx, &cell) in cell_of.iter().enumerate() {
        if cell == usize::MAX {
            continue;
        }
        let (k, m) = (cell % nk, cell / nk);
        let curve = &panel.loads[idx * ni..(idx + 1) * ni];
        for (i, &v) in curve.iter().enumerate() {
            let d = v - x.get(i, k, m);
            within += d * d;
        }
    }
    Ok(WeightedTensorPair {
        w,
        x,
        temp_grid: grid.values().to_vec(),
        n_sites: nn,
        regime_count: ne,
        within_bin_variance: within,
    })
}

/// Time × day × site tensor for the unconstrained baseline, with a 0/1
/// weight tensor marking observed days.
pub fn day_tensor<T: Scalar>(panel: &LoadPanel<T>) -> (Tensor3<T>, Tensor3<T>) {
    let (ni, nn, nj) = (panel.n_times(), panel.n_sites(), panel.n_days());
    let dims = (ni, nj, nn);
    let mut w = Tensor3::zeros(dims);
    let mut x = Tensor3::zeros(dims);
    for j in 0..nj {
        for n in 0..nn {
            if let Some(curve) = panel.curve(j, n) {
                for (i, &v) in curve.iter().enumerate() {
                    w.set(i, j, n, T::one());
                    x.set(i, j, n, v);
                }
            }
        }
    }
    (w, x)
}

/// Per-day functional objective `F + P`:
/// `Σ_{i,j,n} (X_{j,n}(u_i) − Σ_r a_r(u_i) b_r(T_{j,n}) c^{(ε_{j,n})}_{n,r})²`
/// plus `α Σ_r a_rᵀQ₁a_r + β Σ_r b_rᵀQ₂b_r`, summed directly over days.
pub fn functional_objective<T: Scalar>(
    panel: &LoadPanel<T>,
    factors: &FactorSet<T>,
    grid: &TemperatureGrid<T>,
    intraday: &SplineSystem<T>,
    thermal: &SplineSystem<T>,
    alpha: T,
    beta: T,
) -> Result<T> {
    let temps = panel.require_temps()?;
    let (ni, nn, nj) = (panel.n_times(), panel.n_sites(), panel.n_days());
    let r = factors.rank();
    let (a, b, c) = (&factors.a, &factors.b, &factors.c);
    if a.nrows() != ni
        || b.nrows() != grid.len()
        || c.nrows() != panel.regime_count * nn
        || intraday.len() != ni
        || thermal.len() != grid.len()
    {
        return Err(Error::DimensionMismatch(format!(
            "factors {}x{r}, {}x{r}, {}x{r} vs panel I={ni}, K={}, EN={}",
            a.nrows(),
            b.nrows(),
            c.nrows(),
            grid.len(),
            panel.regime_count * nn
        )));
    }
    let mut fit = T::zero();
    for j in 0..nj {
        for n in 0..nn {
            let Some(curve) = panel.curve(j, n) else { continue };
            let idx = panel.slot(j, n);
            let t = temps[idx];
            let k = grid.bin(t).ok_or(Error::OffGrid(t.to_f64_lossy()))?;
            let m = panel.regimes[idx] * nn + n;
            for (i, &x) in curve.iter().enumerate() {
                let mut model = T::zero();
                for q in 0..r {
                    model += a[[i, q]] * b[[k, q]] * c[[m, q]];
                }
                let d = x - model;
                fit += d * d;
            }
        }
    }
    let mut penalty = T::zero();
    for q in 0..r {
        penalty += alpha * intraday.quadratic_form(&a.column(q).to_vec());
        penalty += beta * thermal.quadratic_form(&b.column(q).to_vec());
    }
    Ok(fit + penalty)
}
