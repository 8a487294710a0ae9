//! Synthetic load panels generated from planted smooth factors.
//!
//! Signatures are mixtures of squared raised-cosine bumps on the 24-hour
//! circle (periodic and smooth by construction); thermal activations are
//! logistic heating/cooling ramps, flat levels or U-shapes. Sites belong to
//! clusters with shared activation templates plus jitter.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{LoadPanel, PanelParts};
use crate::scalar::Scalar;
use crate::solver::FactorSet;
use crate::splinequad::SplineSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    /// Number of planted components.
    pub rank: usize,
    /// Intra-day samples per day; must divide 1440 so times are whole minutes.
    pub times: usize,
    pub temp_min: f64,
    pub temp_max: f64,
    /// Temperatures are drawn on multiples of this step.
    pub temp_resolution: f64,
    pub regimes: usize,
    pub sites: usize,
    pub days: usize,
    pub clusters: usize,
    /// Standard deviation of per-site deviations from the cluster template.
    pub cluster_jitter: f64,
    /// Noise standard deviation relative to the mean clean load.
    pub noise_sd: f64,
    /// Standard deviation of per-site climate offsets (°C).
    pub climate_spread: f64,
    /// Day-to-day temperature noise (°C).
    pub weather_sd: f64,
    /// Give every site its own random ordering of the seasonal cycle.
    pub shuffle_days: bool,
    /// Explicit activation templates (rows of length regimes·rank), one per cluster.
    pub templates: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            rank: 3,
            times: 24,
            temp_min: 0.0,
            temp_max: 20.0,
            temp_resolution: 1.0,
            regimes: 1,
            sites: 12,
            days: 120,
            clusters: 3,
            cluster_jitter: 0.03,
            noise_sd: 0.0,
            climate_spread: 0.0,
            weather_sd: 1.5,
            shuffle_days: false,
            templates: None,
            seed: 0,
        }
    }
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.rank == 0 || self.sites == 0 || self.days == 0 || self.regimes == 0 {
            return bad("rank, sites, days and regimes must be positive");
        }
        if self.times < 3 || 1440 % self.times != 0 {
            return bad("times must be at least 3 and divide 1440");
        }
        if !(self.temp_resolution > 0.0) || !(self.temp_max > self.temp_min) {
            return bad("temperature range and resolution must be positive");
        }
        if self.clusters == 0 || self.clusters > self.sites {
            return bad("clusters must be between 1 and the number of sites");
        }
        if self.regimes > 2 {
            return bad("at most two regimes (weekday/weekend) are generated");
        }
        if self.noise_sd < 0.0 || self.cluster_jitter < 0.0 || self.weather_sd < 0.0 {
            return bad("noise levels must be nonnegative");
        }
        if let Some(t) = &self.templates {
            if t.len() != self.clusters || t.iter().any(|row| row.len() != self.regimes * self.rank) {
                return bad("templates must be clusters × (regimes·rank)");
            }
            if t.iter().flatten().any(|&v| !(v >= 0.0)) {
                return bad("templates must be nonnegative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThermalShape {
    Heating { threshold: f64, width: f64 },
    Cooling { threshold: f64, width: f64 },
    Flat,
    U { low: f64, high: f64, width: f64 },
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ThermalShape {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ThermalShape::Heating { threshold, width } => 0.05 + logistic((threshold - t) / width),
            ThermalShape::Cooling { threshold, width } => 0.05 + logistic((t - threshold) / width),
            ThermalShape::Flat => 1.0,
            ThermalShape::U { low, high, width } => {
                0.05 + logistic((low - t) / width) + logistic((t - high) / width)
            }
        }
    }
}

/// One squared raised-cosine bump on the 24-hour circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub floor: f64,
    pub bumps: Vec<Bump>,
}

impl Signature {
    pub fn eval(&self, u: f64) -> f64 {
        let mut v = self.floor;
        for b in &self.bumps {
            let mut d = (u - b.center).rem_euclid(24.0);
            if d > 12.0 {
                d = 24.0 - d;
            }
            if d < b.half_width {
                let c = (std::f64::consts::PI * d / (2.0 * b.half_width)).cos();
                v += b.height * c * c * c * c;
            }
        }
        v
    }
}

/// Planted factors and cluster labels behind a synthetic panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub signatures: Vec<Signature>,
    pub thermal: Vec<ThermalShape>,
    /// Raw activations, row `e·N + n`, one column per component.
    pub activations: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub templates: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// Planted factors sampled on the given grids, with `A` and `B` columns
    /// normalized by the spline integral weights and `C` compensated.
    pub fn factors_on<T: Scalar>(
        &self,
        intraday: &SplineSystem<T>,
        thermal: &SplineSystem<T>,
    ) -> FactorSet<T> {
        let rank = self.signatures.len();
        let ni = intraday.len();
        let nk = thermal.len();
        let nm = self.activations.len();
        let mut a = Array2::<T>::zeros((ni, rank));
        let mut b = Array2::<T>::zeros((nk, rank));
        let mut c = Array2::<T>::zeros((nm, rank));
        for r in 0..rank {
            for (i, &u) in intraday.grid().iter().enumerate() {
                a[[i, r]] = T::lit(self.signatures[r].eval(u.to_f64_lossy()));
            }
            for (k, &t) in thermal.grid().iter().enumerate() {
                b[[k, r]] = T::lit(self.thermal[r].eval(t.to_f64_lossy()));
            }
            let sa: T = a.column(r).iter().zip(intraday.weights()).map(|(&x, &w)| x * w).sum();
            let sb: T = b.column(r).iter().zip(thermal.weights()).map(|(&x, &w)| x * w).sum();
            a.column_mut(r).mapv_inplace(|x| x / sa);
            b.column_mut(r).mapv_inplace(|x| x / sb);
            for m in 0..nm {
                c[[m, r]] = T::lit(self.activations[m][r]) * sa * sb;
            }
        }
        FactorSet { a, b, c }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub panel: LoadPanel<T>,
    pub truth: GroundTruth,
}

fn planted_signatures(rank: usize, rng: &mut ChaCha8Rng) -> Vec<Signature> {
    (0..rank)
        .map(|r| {
            let main = 24.0 * (r as f64 + 0.5) / rank as f64 + rng.random_range(-1.0..1.0);
            let mut bumps = vec![Bump {
                center: main.rem_euclid(24.0),
                half_width: rng.random_range(3.0..6.0),
                height: 1.0,
            }];
            if r % 2 == 1 {
                bumps.push(Bump {
                    center: (main + rng.random_range(7.0..10.0)).rem_euclid(24.0),
                    half_width: rng.random_range(2.5..4.0),
                    height: rng.random_range(0.3..0.6),
                });
            }
            Signature {
                floor: 0.05,
                bumps,
            }
        })
        .collect()
}

fn planted_thermal(rank: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<ThermalShape> {
    let span = hi - lo;
    (0..rank)
        .map(|r| {
            let width = span * rng.random_range(0.06..0.12);
            match r % 4 {
                0 => ThermalShape::Heating {
                    threshold: lo + span * rng.random_range(0.3..0.45),
                    width,
                },
                1 => ThermalShape::Cooling {
                    threshold: lo + span * rng.random_range(0.55..0.7),
                    width,
                },
                2 => ThermalShape::Flat,
                _ => ThermalShape::U {
                    low: lo + span * 0.25,
                    high: lo + span * 0.75,
                    width,
                },
            }
        })
        .collect()
}

fn planted_templates(spec: &PlantSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if let Some(t) = &spec.templates {
        return t.clone();
    }
    let dim = spec.regimes * spec.rank;
    let min_sep = (5.0 * spec.cluster_jitter * (dim as f64).sqrt()).max(0.3);
    let mut best: Vec<Vec<f64>> = Vec::new();
    let mut best_sep = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let cand: Vec<Vec<f64>> = (0..spec.clusters)
            .map(|_| (0..dim).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect();
        let mut sep = f64::INFINITY;
        for x in 0..cand.len() {
            for y in (x + 1)..cand.len() {
                let d: f64 = cand[x]
                    .iter()
                    .zip(&cand[y])
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                sep = sep.min(d);
            }
        }
        if sep > best_sep {
            best_sep = sep;
            best = cand;
        }
        if best_sep >= min_sep {
            break;
        }
    }
    best
}

/// Draws a panel from `spec`. Deterministic in `spec.seed`.
pub fn generate<T: Scalar>(spec: &PlantSpec) -> Result<Synthetic<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ni, nn, nj, ne, rank) = (spec.times, spec.sites, spec.days, spec.regimes, spec.rank);
    let signatures = planted_signatures(rank, &mut rng);
    let thermal = planted_thermal(rank, spec.temp_min, spec.temp_max, &mut rng);
    let templates = planted_templates(spec, &mut rng);

    let labels: Vec<usize> = (0..nn).map(|n| n % spec.clusters).collect();
    let jitter = Normal::new(0.0, spec.cluster_jitter.max(0.0)).expect("valid sd");
    let mut activations = vec![vec![0.0; rank]; ne * nn];
    for n in 0..nn {
        let tpl = &templates[labels[n]];
        for e in 0..ne {
            for r in 0..rank {
                let v = tpl[e * rank + r] + jitter.sample(&mut rng);
                activations[e * nn + n][r] = v.max(0.0);
            }
        }
    }

    let res = spec.temp_resolution;
    let mid = 0.5 * (spec.temp_min + spec.temp_max);
    let amp = 0.5 * (spec.temp_max - spec.temp_min);
    let climate = Normal::new(0.0, spec.climate_spread.max(0.0)).expect("valid sd");
    let weather = Normal::new(0.0, spec.weather_sd.max(0.0)).expect("valid sd");
    let mut temps = vec![0.0; nj * nn];
    for n in 0..nn {
        let offset = climate.sample(&mut rng);
        let mut order: Vec<usize> = (0..nj).collect();
        if spec.shuffle_days {
            order.shuffle(&mut rng);
        }
        for j in 0..nj {
            let phase = 2.0 * std::f64::consts::PI * order[j] as f64 / nj as f64;
            let raw = mid + offset + amp * phase.cos() + weather.sample(&mut rng);
            let clamped = raw.clamp(spec.temp_min, spec.temp_max);
            temps[j * nn + n] = (clamped / res).round() * res;
        }
    }
    let regimes: Vec<usize> = (0..nj * nn)
        .map(|idx| {
            let j = idx / nn;
            if ne == 2 && j % 7 >= 5 {
                1
            } else {
                0
            }
        })
        .collect();

    let grid: Vec<f64> = (0..ni).map(|i| 24.0 * i as f64 / ni as f64).collect();
    let sig: Vec<Vec<f64>> = signatures
        .iter()
        .map(|s| grid.iter().map(|&u| s.eval(u)).collect())
        .collect();
    let mut clean = vec![0.0; nj * nn * ni];
    for j in 0..nj {
        for n in 0..nn {
            let idx = j * nn + n;
            let m = regimes[idx] * nn + n;
            let t = temps[idx];
            for r in 0..rank {
                let w = thermal[r].eval(t) * activations[m][r];
                for i in 0..ni {
                    clean[idx * ni + i] += sig[r][i] * w;
                }
            }
        }
    }
    let level = clean.iter().sum::<f64>() / clean.len() as f64;
    let noise = Normal::new(0.0, (spec.noise_sd * level).max(0.0)).expect("valid sd");
    let loads: Vec<T> = clean
        .iter()
        .map(|&x| {
            let y = if spec.noise_sd > 0.0 { x + noise.sample(&mut rng) } else { x };
            T::lit(y.max(0.0))
        })
        .collect();

    let panel = LoadPanel::new(PanelParts {
        intraday_grid: grid.iter().map(|&u| T::lit(u)).collect(),
        sites: (0..nn).map(|n| format!("site{:03}", n + 1)).collect(),
        days: (0..nj).map(|j| format!("day{:03}", j + 1)).collect(),
        loads,
        observed: vec![true; nj * nn],
        temps: Some(temps.iter().map(|&t| T::lit(t)).collect()),
        regimes: Some(regimes),
        regime_count: ne,
    })?;
    Ok(Synthetic {
        panel,
        truth: GroundTruth {
            signatures,
            thermal,
            activations,
            labels,
            templates,
        },
    })
}
