//! Test-only oracles, independent of the library's solution paths.
#![allow(dead_code)]

pub mod panels;

use nalgebra::{DMatrix, DVector};
use smooth_ntf::tensor::Tensor3;

/// Piecewise cubic `s(t) = c0 + c1 d + c2 d² + c3 d³`, `d = t − start`, per interval.
pub struct PiecewiseCubic {
    pub starts: Vec<f64>,
    pub widths: Vec<f64>,
    pub coeffs: Vec<[f64; 4]>,
}

impl PiecewiseCubic {
    /// Interpolating natural or periodic cubic spline, built by solving the
    /// full 4·(intervals) coefficient system with dense LU.
    pub fn interpolate(grid: &[f64], values: &[f64], period: Option<f64>) -> Self {
        let n = grid.len();
        let (starts, widths, ends): (Vec<f64>, Vec<f64>, Vec<usize>) = match period {
            None => (
                grid[..n - 1].to_vec(),
                grid.windows(2).map(|w| w[1] - w[0]).collect(),
                (1..n).collect(),
            ),
            Some(p) => (
                grid.to_vec(),
                (0..n)
                    .map(|i| if i + 1 < n { grid[i + 1] - grid[i] } else { p - grid[n - 1] + grid[0] })
                    .collect(),
                (0..n).map(|i| (i + 1) % n).collect(),
            ),
        };
        let m = starts.len();
        let size = 4 * m;
        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut rhs = DVector::<f64>::zeros(size);
        let mut row = 0;
        for s in 0..m {
            let h = widths[s];
            // value at left end
            a[(row, 4 * s)] = 1.0;
            rhs[row] = values[s];
            row += 1;
            // value at right end
            for p in 0..4 {
                a[(row, 4 * s + p)] = h.powi(p as i32);
            }
            rhs[row] = values[ends[s]];
            row += 1;
        }
        // C1 and C2 continuity between interval s and its successor.
        let joins: Vec<(usize, usize)> = match period {
            None => (0..m - 1).map(|s| (s, s + 1)).collect(),
            Some(_) => (0..m).map(|s| (s, (s + 1) % m)).collect(),
        };
        for (s, t) in joins {
            let h = widths[s];
            // s'(h) − t'(0) = 0
            a[(row, 4 * s + 1)] = 1.0;
            a[(row, 4 * s + 2)] = 2.0 * h;
            a[(row, 4 * s + 3)] = 3.0 * h * h;
            a[(row, 4 * t + 1)] -= 1.0;
            row += 1;
            // s''(h) − t''(0) = 0
            a[(row, 4 * s + 2)] = 2.0;
            a[(row, 4 * s + 3)] = 6.0 * h;
            a[(row, 4 * t + 2)] -= 2.0;
            row += 1;
        }
        if period.is_none() {
            a[(row, 2)] = 2.0;
            row += 1;
            let h = widths[m - 1];
            a[(row, 4 * (m - 1) + 2)] = 2.0;
            a[(row, 4 * (m - 1) + 3)] = 6.0 * h;
            row += 1;
        }
        assert_eq!(row, size);
        let sol = a.lu().solve(&rhs).expect("interpolation system solvable");
        let coeffs = (0..m)
            .map(|s| [sol[4 * s], sol[4 * s + 1], sol[4 * s + 2], sol[4 * s + 3]])
            .collect();
        Self { starts, widths, coeffs }
    }

    fn eval_local(&self, s: usize, d: f64) -> f64 {
        let c = self.coeffs[s];
        c[0] + d * (c[1] + d * (c[2] + d * c[3]))
    }

    fn second_local(&self, s: usize, d: f64) -> f64 {
        let c = self.coeffs[s];
        2.0 * c[2] + 6.0 * c[3] * d
    }

    /// Composite Simpson over all intervals with `panels` panels in total
    /// (distributed by width, at least 2 per interval). Returns
    /// `(∫s, ∫(s″)²)`.
    pub fn quadrature(&self, panels: usize) -> (f64, f64) {
        let total: f64 = self.widths.iter().sum();
        let (mut integral, mut curvature) = (0.0, 0.0);
        for s in 0..self.widths.len() {
            let h = self.widths[s];
            let mut p = ((panels as f64) * h / total).ceil() as usize;
            p = p.max(2);
            if p % 2 == 1 {
                p += 1;
            }
            let step = h / p as f64;
            let (mut si, mut sc) = (0.0, 0.0);
            for q in 0..=p {
                let d = step * q as f64;
                let w = if q == 0 || q == p { 1.0 } else if q % 2 == 1 { 4.0 } else { 2.0 };
                si += w * self.eval_local(s, d);
                let dd = self.second_local(s, d);
                sc += w * dd * dd;
            }
            integral += si * step / 3.0;
            curvature += sc * step / 3.0;
        }
        (integral, curvature)
    }
}

/// Minimizer of `Σ (W (P − x⊗u⊗v))² + weight·xᵀQx` along one mode via an
/// explicit design matrix and normal equations (nalgebra LU).
///
/// `mode` is 1, 2 or 3; `(u, v)` are the vectors of the other two modes in
/// increasing mode order.
pub fn dense_column_solve(
    mode: usize,
    w: &Tensor3<f64>,
    partial: &Tensor3<f64>,
    u: &[f64],
    v: &[f64],
    q: Option<&ndarray::Array2<f64>>,
    weight: f64,
) -> Vec<f64> {
    let (ni, nk, nm) = w.dims();
    let len = [ni, nk, nm][mode - 1];
    let rows = ni * nk * nm;
    let mut design = DMatrix::<f64>::zeros(rows, len);
    let mut target = DVector::<f64>::zeros(rows);
    let mut row = 0;
    for i in 0..ni {
        for k in 0..nk {
            for m in 0..nm {
                let wv = w.get(i, k, m);
                let (col, coef) = match mode {
                    1 => (i, u[k] * v[m]),
                    2 => (k, u[i] * v[m]),
                    _ => (m, u[i] * v[k]),
                };
                design[(row, col)] = wv * coef;
                target[row] = wv * partial.get(i, k, m);
                row += 1;
            }
        }
    }
    let mut normal = design.transpose() * &design;
    if let Some(q) = q {
        for a in 0..len {
            for b in 0..len {
                normal[(a, b)] += weight * q[[a, b]];
            }
        }
    }
    let rhs = design.transpose() * target;
    let x = normal.lu().solve(&rhs).expect("normal equations solvable");
    x.iter().copied().collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nx * ny)
}

/// Best mean cosine over all column permutations (R ≤ 6), returning the
/// permutation `perm[fitted] = planted` and per-column cosines.
pub fn best_match(
    fitted: &[Vec<Vec<f64>>],
    planted: &[Vec<Vec<f64>>],
) -> (Vec<usize>, Vec<f64>) {
    // fitted[mode][r] = column vector
    let r = fitted[0].len();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = (f64::NEG_INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let score: f64 = (0..r)
            .map(|c| {
                fitted
                    .iter()
                    .zip(planted)
                    .map(|(f, t)| cosine(&f[c], &t[p[c]]))
                    .product::<f64>()
            })
            .sum();
        if score > best.0 {
            best = (score, p.to_vec());
        }
    });
    let perm = best.1;
    let cos = (0..r)
        .flat_map(|c| {
            fitted
                .iter()
                .zip(planted)
                .map(|(f, t)| cosine(&f[c], &t[perm[c]]))
                .collect::<Vec<_>>()
        })
        .collect();
    (perm, cos)
}

fn permute(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, f);
        p.swap(start, i);
    }
}

pub fn columns(mat: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    mat.columns().into_iter().map(|c| c.to_vec()).collect()
}

/// Pair-counting ARI by enumerating every pair of points.
pub fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as u64;
    let (mut both, mut in_a, mut in_b) = (0u64, 0u64, 0u64);
    for x in 0..a.len() {
        for y in (x + 1)..a.len() {
            let sa = a[x] == a[y];
            let sb = b[x] == b[y];
            in_a += sa as u64;
            in_b += sb as u64;
            both += (sa && sb) as u64;
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    if pairs == 0.0 {
        return 1.0;
    }
    let expected = in_a as f64 * in_b as f64 / pairs;
    let max = 0.5 * (in_a as f64 + in_b as f64);
    if max == expected {
        return 1.0;
    }
    (both as f64 - expected) / (max - expected)
}

/// Silhouette straight from the definition.
pub fn direct_silhouette(points: &ndarray::Array2<f64>, labels: &[usize]) -> f64 {
    let n = points.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        points
            .row(i)
            .iter()
            .zip(points.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let own_size = labels.iter().filter(|&&l| l == own).count();
        if own_size == 1 {
            continue;
        }
        let a = (0..n).filter(|&j| j != i && labels[j] == own).map(|j| dist(i, j)).sum::<f64>()
            / (own_size - 1) as f64;
        let mut b = f64::INFINITY;
        for &c in &distinct {
            if c == own {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let mean = members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64;
            b = b.min(mean);
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

/// A generated panel together with its assembled tensors and spline systems.
pub struct Problem {
    pub synthetic: smooth_ntf::synthgen::Synthetic<f64>,
    pub pair: smooth_ntf::panel::WeightedTensorPair<f64>,
    pub intraday: smooth_ntf::splinequad::SplineSystem<f64>,
    pub thermal: smooth_ntf::splinequad::SplineSystem<f64>,
}

impl Problem {
    pub fn generate(spec: &smooth_ntf::synthgen::PlantSpec) -> Self {
        use smooth_ntf::panel::{assemble_tensors, build_temperature_grid};
        use smooth_ntf::splinequad::SplineSystem;
        let synthetic = smooth_ntf::synthgen::generate::<f64>(spec).expect("valid spec");
        let grid = build_temperature_grid(&synthetic.panel, spec.temp_resolution).unwrap();
        let pair = assemble_tensors(&synthetic.panel, &grid).unwrap();
        let intraday = SplineSystem::periodic(synthetic.panel.intraday_grid(), 24.0).unwrap();
        let thermal = SplineSystem::natural(grid.values()).unwrap();
        Self { synthetic, pair, intraday, thermal }
    }

    /// `‖W ∘ X‖²`.
    pub fn data_norm(&self) -> f64 {
        self.pair
            .w
            .as_slice()
            .iter()
            .zip(self.pair.x.as_slice())
            .map(|(w, x)| (w * x).powi(2))
            .sum()
    }

    /// Per-column cosines against the planted factors after the best permutation.
    pub fn planted_cosines(&self, f: &smooth_ntf::solver::FactorSet<f64>) -> Vec<f64> {
        let truth = self.synthetic.truth.factors_on(&self.intraday, &self.thermal);
        let fitted = [columns(&f.a), columns(&f.b), columns(&f.c)];
        let planted = [columns(&truth.a), columns(&truth.b), columns(&truth.c)];
        best_match(&fitted, &planted).1
    }
}
