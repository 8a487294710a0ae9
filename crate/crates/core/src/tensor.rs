//! Dense three-way tensors with the unfoldings used by the HALS updates.
//!
//! Storage is column-major in `(i, k, m)`: entry `(i, k, m)` lives at
//! `i + I·(k + K·m)`, so mode-1 fibers are contiguous and the mode-1
//! unfolding is the buffer itself read as an `I × (K·M)` column-major matrix.
//! Unfoldings follow the usual convention: mode-n fibers become columns and
//! the remaining indices are ordered with the earlier mode varying fastest.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    dims: (usize, usize, usize),
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![T::zero(); dims.0 * dims.1 * dims.2],
        }
    }

    pub fn filled(dims: (usize, usize, usize), value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.0 * dims.1 * dims.2],
        }
    }

    /// Wraps a buffer laid out as documented at the module level.
    pub fn from_vec(dims: (usize, usize, usize), data: Vec<T>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for m in 0..dims.2 {
            for k in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, k, m));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize, m: usize) -> usize {
        i + self.dims.0 * (k + self.dims.1 * m)
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, m: usize) -> T {
        self.data[self.index(i, k, m)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, m: usize, value: T) {
        let idx = self.index(i, k, m);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Mode-n unfolding (`mode` ∈ {1, 2, 3}).
    pub fn unfold(&self, mode: usize) -> Result<Array2<T>> {
        let (ni, nk, nm) = self.dims;
        let out = match mode {
            1 => Array2::from_shape_fn((ni, nk * nm), |(i, col)| {
                self.get(i, col % nk, col / nk)
            }),
            2 => Array2::from_shape_fn((nk, ni * nm), |(k, col)| {
                self.get(col % ni, k, col / ni)
            }),
            3 => Array2::from_shape_fn((nm, ni * nk), |(m, col)| {
                self.get(col % ni, col / ni, m)
            }),
            other => return Err(Error::InvalidMode(other)),
        };
        Ok(out)
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn refold(matrix: &Array2<T>, mode: usize, dims: (usize, usize, usize)) -> Result<Self> {
        let (ni, nk, nm) = dims;
        let expected = match mode {
            1 => (ni, nk * nm),
            2 => (nk, ni * nm),
            3 => (nm, ni * nk),
            other => return Err(Error::InvalidMode(other)),
        };
        if matrix.dim() != expected {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} unfolding of {dims:?} must be {expected:?}, got {:?}",
                matrix.dim()
            )));
        }
        Ok(Self::from_fn(dims, |i, k, m| match mode {
            1 => matrix[[i, k + nk * m]],
            2 => matrix[[k, i + ni * m]],
            _ => matrix[[m, i + ni * k]],
        }))
    }
}

/// Outer product `a ∘ b ∘ c`.
pub fn rank1<T: Scalar>(a: &[T], b: &[T], c: &[T]) -> Tensor3<T> {
    Tensor3::from_fn((a.len(), b.len(), c.len()), |i, k, m| a[i] * b[k] * c[m])
}

/// Kronecker product of vectors, `out[m·K + k] = c[m]·b[k]`.
pub fn kron_vec<T: Scalar>(c: &[T], b: &[T]) -> Array1<T> {
    let mut out = Array1::zeros(c.len() * b.len());
    for (m, &cm) in c.iter().enumerate() {
        for (k, &bk) in b.iter().enumerate() {
            out[m * b.len() + k] = cm * bk;
        }
    }
    out
}

/// Khatri-Rao (column-wise Kronecker) product `C ⊙ B`.
pub fn khatri_rao<T: Scalar>(c: &Array2<T>, b: &Array2<T>) -> Result<Array2<T>> {
    if c.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "khatri-rao of {} and {} columns",
            c.ncols(),
            b.ncols()
        )));
    }
    let mut out = Array2::zeros((c.nrows() * b.nrows(), c.ncols()));
    for r in 0..c.ncols() {
        let col = kron_vec(&c.column(r).to_vec(), &b.column(r).to_vec());
        out.column_mut(r).assign(&col);
    }
    Ok(out)
}

/// `Σ (W ∘ R)²` over all entries.
pub fn weighted_sq_norm<T: Scalar>(w: &Tensor3<T>, r: &Tensor3<T>) -> Result<T> {
    if w.dims() != r.dims() {
        return Err(Error::DimensionMismatch(format!(
            "weight dims {:?} vs tensor dims {:?}",
            w.dims(),
            r.dims()
        )));
    }
    Ok(w.data
        .iter()
        .zip(&r.data)
        .map(|(&wv, &rv)| {
            let x = wv * rv;
            x * x
        })
        .sum())
}
