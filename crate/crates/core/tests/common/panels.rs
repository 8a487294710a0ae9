use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smooth_ntf::panel::{LoadPanel, PanelParts};
use smooth_ntf::solver::FactorSet;
use smooth_ntf::tensor::Tensor3;

/// Random small panel: up to 6 times, 5 temperature values, 2 regimes,
/// 4 sites and 12 days, with some masked days.
pub fn random_panel(seed: u64) -> LoadPanel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ni = rng.random_range(3..=6);
    let nk = rng.random_range(2..=5);
    let ne = rng.random_range(1..=2);
    let nn = rng.random_range(1..=4);
    let nj = rng.random_range(4..=12);
    let temps_pool: Vec<f64> = (0..nk).map(|k| 2.0 * k as f64 - 1.0).collect();
    let mut temps = Vec::new();
    let mut regimes = Vec::new();
    let mut observed = Vec::new();
    let mut loads = Vec::new();
    for j in 0..nj {
        for _n in 0..nn {
            // first two days force both extremes of the grid
            let k = if j == 0 { 0 } else if j == 1 { nk - 1 } else { rng.random_range(0..nk) };
            temps.push(temps_pool[k] + rng.random_range(-0.3..0.3));
            regimes.push(rng.random_range(0..ne));
            observed.push(j < 2 || rng.random_bool(0.85));
            for _ in 0..ni {
                loads.push(rng.random_range(0.0..4.0));
            }
        }
    }
    LoadPanel::new(PanelParts {
        intraday_grid: (0..ni).map(|i| 24.0 * i as f64 / ni as f64).collect(),
        sites: (0..nn).map(|n| format!("s{n}")).collect(),
        days: (0..nj).map(|j| format!("d{j}")).collect(),
        loads,
        observed,
        temps: Some(temps),
        regimes: Some(regimes),
        regime_count: ne,
    })
    .unwrap()
}

pub fn random_factors(dims: (usize, usize, usize), rank: usize, seed: u64) -> FactorSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| rng.random_range(0.0..1.5));
    FactorSet {
        a: draw(dims.0, rank),
        b: draw(dims.1, rank),
        c: draw(dims.2, rank),
    }
}

/// Tensor with entries uniform on `[lo, hi)`.
pub fn random_tensor(dims: (usize, usize, usize), lo: f64, hi: f64, seed: u64) -> Tensor3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(lo..hi))
}

/// `X − Σ_{s≠r} a_s∘b_s∘c_s`, built with plain loops.
pub fn partial_residual(x: &Tensor3<f64>, f: &FactorSet<f64>, r: usize) -> Tensor3<f64> {
    let (ni, nk, nm) = x.dims();
    Tensor3::from_fn((ni, nk, nm), |i, k, m| {
        let model: f64 = (0..f.rank())
            .filter(|&s| s != r)
            .map(|s| f.a[[i, s]] * f.b[[k, s]] * f.c[[m, s]])
            .sum();
        x.get(i, k, m) - model
    })
}
