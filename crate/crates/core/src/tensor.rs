//! Kronecker-sum operators applied through mode products.
//!
//! Vectors of length `N = n_1 * ... * n_d` are viewed as tensors with the
//! first direction varying fastest, so `(A_d ⊗ ... ⊗ A_1) v` applies `A_l`
//! along direction `l`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

/// Below this many multiply-adds a mode product uses plain loops instead of gemm.
const GEMM_THRESHOLD: usize = 4096;

/// Computes `dst = src ×_mode mat`, where `src` has shape `dims` and `mat` is
/// `r × dims[mode]`. The output has shape `dims` with `dims[mode]` replaced by `r`.
pub fn mode_product<T: Real>(
    src: &[T],
    dims: &[usize],
    mode: usize,
    mat: &DMatrix<T>,
    dst: &mut Vec<T>,
) {
    let left: usize = dims[..mode].iter().product();
    let c = dims[mode];
    let right: usize = dims[mode + 1..].iter().product();
    let r = mat.nrows();
    debug_assert_eq!(mat.ncols(), c);
    debug_assert_eq!(src.len(), left * c * right);
    dst.clear();
    dst.resize(left * r * right, T::zero());

    if left * c * right * r < GEMM_THRESHOLD {
        for b in 0..right {
            let sblock = &src[b * left * c..(b + 1) * left * c];
            let dblock = &mut dst[b * left * r..(b + 1) * left * r];
            for k in 0..c {
                let scol = &sblock[k * left..(k + 1) * left];
                for i in 0..r {
                    let mik = mat[(i, k)];
                    if mik == T::zero() {
                        continue;
                    }
                    let dcol = &mut dblock[i * left..(i + 1) * left];
                    for (d, &s) in dcol.iter_mut().zip(scol) {
                        *d += mik * s;
                    }
                }
            }
        }
        return;
    }

    if left == 1 {
        let y = DMatrixView::from_slice(src, c, right);
        let mut out = DMatrixViewMut::from_slice(dst.as_mut_slice(), r, right);
        out.gemm(T::one(), mat, &y, T::zero());
    } else {
        let mat_t = mat.transpose();
        for b in 0..right {
            let x = DMatrixView::from_slice(&src[b * left * c..(b + 1) * left * c], left, c);
            let mut out =
                DMatrixViewMut::from_slice(&mut dst[b * left * r..(b + 1) * left * r], left, r);
            out.gemm(T::one(), &x, &mat_t, T::zero());
        }
    }
}

/// Contracts the fastest index of `src` (length `mat.ncols()`) with `mat` and
/// moves the new index to the slowest position, in one gemm.
///
/// Applying this once per direction, in order, restores the original layout.
pub fn rotating_mode_product<T: Real>(src: &[T], mat: &DMatrix<T>, dst: &mut Vec<T>) {
    let c = mat.ncols();
    let rest = src.len() / c;
    debug_assert_eq!(rest * c, src.len());
    let y = mat * DMatrixView::from_slice(src, c, rest);
    dst.clear();
    dst.resize(rest * mat.nrows(), T::zero());
    y.transpose_to(&mut DMatrixViewMut::from_slice(dst.as_mut_slice(), rest, mat.nrows()));
}

/// Applies `factors[l]` along every direction `l` in turn: `(F_d ⊗ ... ⊗ F_1) v`.
///
/// `dims` are the input sizes; each factor may be rectangular.
pub fn kron_apply<T: Real>(factors: &[&DMatrix<T>], dims: &[usize], v: &[T]) -> Vec<T> {
    let mut cur = v.to_vec();
    let mut shape = dims.to_vec();
    let mut buf = Vec::new();
    for (l, f) in factors.iter().enumerate() {
        mode_product(&cur, &shape, l, f, &mut buf);
        shape[l] = f.nrows();
        std::mem::swap(&mut cur, &mut buf);
    }
    cur
}

/// Sum of Kronecker products `sum_k A_d^(k) ⊗ ... ⊗ A_1^(k)` of square factors.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerSumOperator<T: Real> {
    dims: Vec<usize>,
    /// `terms[k][l]` acts on direction `l`.
    terms: Vec<Vec<DMatrix<T>>>,
}

impl<T: Real> KroneckerSumOperator<T> {
    pub fn new(terms: Vec<Vec<DMatrix<T>>>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| {
            Error::InvalidArgument("Kronecker sum needs at least one term".into())
        })?;
        let dims: Vec<usize> = first.iter().map(|m| m.nrows()).collect();
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "Kronecker terms need at least one factor".into(),
            ));
        }
        for term in &terms {
            if term.len() != dims.len() {
                return Err(Error::DimensionMismatch {
                    expected: dims.len(),
                    got: term.len(),
                });
            }
            for (m, &n) in term.iter().zip(&dims) {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.nrows().max(m.ncols()),
                    });
                }
            }
        }
        Ok(Self { dims, terms })
    }

    /// `sum_l M_d ⊗ ... ⊗ K_l ⊗ ... ⊗ M_1`: the parametric Laplacian structure.
    pub fn laplacian_like(mass: &[DMatrix<T>], stiff: &[DMatrix<T>]) -> Result<Self> {
        if mass.len() != stiff.len() {
            return Err(Error::DimensionMismatch {
                expected: mass.len(),
                got: stiff.len(),
            });
        }
        let d = mass.len();
        let terms = (0..d)
            .map(|k| {
                (0..d)
                    .map(|l| {
                        if l == k {
                            stiff[l].clone()
                        } else {
                            mass[l].clone()
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(terms)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[Vec<DMatrix<T>>] {
        &self.terms
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// `y = sum_terms (A_d ⊗ ... ⊗ A_1) v` via `d` mode products per term.
    pub fn kron_matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                got: v.len(),
            });
        }
        let mut out = vec![T::zero(); v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut a = Vec::with_capacity(v.len());
        let mut b = Vec::with_capacity(v.len());
        for term in &self.terms {
            a.clear();
            a.extend_from_slice(v);
            for (l, f) in term.iter().enumerate() {
                mode_product(&a, &self.dims, l, f, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (o, &x) in out.iter_mut().zip(&a) {
                *o += x;
            }
        }
    }

    /// Explicit `N × N` matrix; refuses when `N` exceeds `limit`.
    pub fn dense_materialize_with_limit(&self, limit: usize) -> Result<DMatrix<T>> {
        let n = self.size();
        if n > limit {
            return Err(Error::TooLarge { size: n, limit });
        }
        let mut out = DMatrix::zeros(n, n);
        for term in &self.terms {
            let mut k = term[0].clone();
            for f in &term[1..] {
                k = f.kronecker(&k);
            }
            out += k;
        }
        Ok(out)
    }

    pub fn dense_materialize(&self) -> Result<DMatrix<T>> {
        self.dense_materialize_with_limit(DENSE_LIMIT)
    }
}

/// Default size guard for dense materialization.
pub const DENSE_LIMIT: usize = 8192;
