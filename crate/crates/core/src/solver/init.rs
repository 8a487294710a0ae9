use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FactorSet;
use crate::linalg::leading_left_singular;
use crate::scalar::{positive_part, Scalar};
use crate::tensor::Tensor3;

/// Relative singular-value level below which a direction counts as absent.
const RANK_TOL: f64 = 1e-10;

/// Positive parts of the leading left singular vectors of one unfolding.
/// Columns beyond the numerical rank come back as `None`.
fn positive_singular_columns<T: Scalar>(
    x: &Tensor3<T>,
    mode: usize,
    rank: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Option<Array1<T>>>, Vec<T>) {
    let y = x.unfold(mode).expect("mode in 1..=3");
    let usable = rank.min(y.nrows()).min(y.ncols());
    let (u, sigma) = if usable > 0 {
        leading_left_singular(y.view(), usable, rng)
    } else {
        (Array2::zeros((y.nrows(), 0)), Vec::new())
    };
    let top = sigma.first().copied().unwrap_or_else(T::zero);
    let mut cols = Vec::with_capacity(rank);
    let mut values = Vec::with_capacity(rank);
    for r in 0..rank {
        if r >= usable || !(sigma[r] > T::lit(RANK_TOL) * top) {
            cols.push(None);
            values.push(T::zero());
            continue;
        }
        let mut col = u.column(r).to_owned();
        let lead = col
            .iter()
            .copied()
            .fold(T::zero(), |best, v| if v.abs() > best.abs() { v } else { best });
        if lead < T::zero() {
            col.mapv_inplace(|v| -v);
        }
        let col = col.mapv(positive_part);
        if col.iter().all(|&v| v == T::zero()) {
            cols.push(None);
        } else {
            cols.push(Some(col));
        }
        values.push(sigma[r]);
    }
    (cols, values)
}

fn normalized_or_uniform<T: Scalar>(col: Option<Array1<T>>, v: &[T]) -> (Array1<T>, T) {
    if let Some(col) = col {
        let s: T = col.iter().zip(v).map(|(&x, &w)| x * w).sum();
        if s > T::zero() {
            return (col.mapv(|x| x / s), s);
        }
    }
    let total: T = v.iter().copied().sum();
    let level = if total > T::zero() { T::one() / total } else { T::one() };
    (Array1::from_elem(v.len(), level), T::zero())
}

/// Initial factors from the positive parts of the leading singular vectors
/// of each unfolding of `x`.
///
/// Each singular vector is sign-flipped so its largest-magnitude entry is
/// positive before clipping. Missing or all-zero columns become uniform.
/// `A` and `B` columns are normalized to `v_aᵀa_r = v_bᵀb_r = 1` and the
/// scales (times the mode-1 singular value) are folded into `C`, so the
/// rank-one terms start at the magnitude of the data. A zero tensor yields
/// uniform factors.
pub fn init_svd_positive<T: Scalar>(
    x: &Tensor3<T>,
    rank: usize,
    v_a: &[T],
    v_b: &[T],
    seed: u64,
) -> FactorSet<T> {
    let (ni, nk, nm) = x.dims();
    assert_eq!(v_a.len(), ni, "intra-day weights length");
    assert_eq!(v_b.len(), nk, "second-mode weights length");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cols_a, sigma) = positive_singular_columns(x, 1, rank, &mut rng);
    let (cols_b, _) = positive_singular_columns(x, 2, rank, &mut rng);
    let (cols_c, _) = positive_singular_columns(x, 3, rank, &mut rng);
    let top = sigma.first().copied().unwrap_or_else(T::zero);

    let mut a = Array2::zeros((ni, rank));
    let mut b = Array2::zeros((nk, rank));
    let mut c = Array2::zeros((nm, rank));
    for (r, ((ca, cb), cc)) in cols_a
        .into_iter()
        .zip(cols_b)
        .zip(cols_c)
        .enumerate()
    {
        let (ar, sa) = normalized_or_uniform(ca, v_a);
        let (br, sb) = normalized_or_uniform(cb, v_b);
        let real = sa > T::zero() && sb > T::zero() && sigma[r] > T::zero();
        let cr = match cc {
            Some(col) if real => col.mapv(|v| v * sigma[r] * sa * sb),
            _ if top > T::zero() => {
                // Padding component: entries about 1e-3 of the data RMS.
                let rms = top / T::from_usize_lossy(ni * nk * nm).sqrt();
                let mass_a: T = v_a.iter().copied().sum();
                let mass_b: T = v_b.iter().copied().sum();
                let level = T::lit(1e-3) * rms * mass_a.abs().max(T::one()) * mass_b.abs().max(T::one());
                Array1::from_elem(nm, level)
            }
            _ => Array1::from_elem(nm, T::one()),
        };
        a.column_mut(r).assign(&ar);
        b.column_mut(r).assign(&br);
        c.column_mut(r).assign(&cr);
    }
    FactorSet { a, b, c }
}
