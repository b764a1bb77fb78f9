//! Univariate B-spline spaces on open knot vectors and tensor-product indexing.
//!
//! Indices are 0-based throughout. A space of dimension `m` has full-basis
//! functions `0..m`; the functions vanishing on the boundary are `0` and
//! `m - 1`, so the interior (Dirichlet) space is the contiguous range `1..m-1`
//! of size `n = m - 2`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::Serialize;

/// Open knot vector of a given degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotVector<T> {
    degree: usize,
    knots: Vec<T>,
}

impl<T: Real> KnotVector<T> {
    /// Validates and wraps a knot sequence.
    ///
    /// The sequence must be nondecreasing in `[0, 1]`, start with `p + 1`
    /// zeros, end with `p + 1` ones, and have interior multiplicities `<= p`.
    pub fn new(degree: usize, knots: Vec<T>) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidArgument("spline degree must be >= 1".into()));
        }
        let p = degree;
        if knots.len() < 2 * p + 2 {
            return Err(Error::InvalidArgument(format!(
                "knot vector of degree {p} needs at least {} knots, got {}",
                2 * p + 2,
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("knots must be nondecreasing".into()));
        }
        let last = knots.len() - 1;
        if knots[..=p].iter().any(|&k| k != T::zero())
            || knots[last - p..].iter().any(|&k| k != T::one())
        {
            return Err(Error::InvalidArgument(
                "knot vector must be open on [0, 1] (p + 1 repeated end knots)".into(),
            ));
        }
        let mut i = p + 1;
        while i < last - p {
            let mut j = i;
            while j < last - p && knots[j] == knots[i] {
                j += 1;
            }
            if j - i > p {
                return Err(Error::InvalidArgument(format!(
                    "interior knot multiplicity {} exceeds degree {p}",
                    j - i
                )));
            }
            i = j;
        }
        Ok(Self { degree, knots })
    }

    /// Open knot vector with `num_elements` uniform spans and single interior knots.
    pub fn uniform(num_elements: usize, degree: usize) -> Result<Self> {
        make_uniform_open_knots(num_elements, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of full-basis functions `m = len - p - 1`.
    pub fn num_functions(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct break points `0 = z_0 < z_1 < ... < z_E = 1`.
    pub fn breaks(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for &k in &self.knots {
            if out.last().is_none_or(|&l| k > l) {
                out.push(k);
            }
        }
        out
    }
}

/// Builds the open uniform knot vector with maximum regularity `C^{p-1}`.
pub fn make_uniform_open_knots<T: Real>(num_elements: usize, p: usize) -> Result<KnotVector<T>> {
    if num_elements < 1 {
        return Err(Error::InvalidArgument("num_elements must be >= 1".into()));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let mut knots = Vec::with_capacity(num_elements + 2 * p + 1);
    knots.extend(std::iter::repeat_n(T::zero(), p + 1));
    for i in 1..num_elements {
        knots.push(T::lit(i as f64 / num_elements as f64));
    }
    knots.extend(std::iter::repeat_n(T::one(), p + 1));
    KnotVector::new(p, knots)
}

/// Values of the active basis functions (and derivatives) at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval<T> {
    /// Full-basis index of the first active function.
    pub first: usize,
    /// `values[k][r]` is the `k`-th derivative of function `first + r`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> BasisEval<T> {
    /// Value of the `deriv`-th derivative of full-basis function `j` (zero if inactive).
    pub fn get(&self, deriv: usize, j: usize) -> T {
        let row = &self.values[deriv];
        if j < self.first || j >= self.first + row.len() {
            T::zero()
        } else {
            row[j - self.first]
        }
    }
}

/// Univariate spline space: full basis of dimension `m`, interior space of dimension `m - 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplineSpace<T> {
    knots: KnotVector<T>,
}

impl<T: Real> SplineSpace<T> {
    pub fn new(knots: KnotVector<T>) -> Result<Self> {
        if knots.num_functions() < 3 {
            return Err(Error::InvalidArgument(format!(
                "space has {} functions; at least one interior function is required",
                knots.num_functions()
            )));
        }
        Ok(Self { knots })
    }

    /// Full-basis space that may have no interior functions (geometry use).
    pub fn full_basis(knots: KnotVector<T>) -> Self {
        Self { knots }
    }

    pub fn uniform(num_elements: usize, degree: usize) -> Result<Self> {
        Self::new(make_uniform_open_knots(num_elements, degree)?)
    }

    pub fn knot_vector(&self) -> &KnotVector<T> {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn dim_full(&self) -> usize {
        self.knots.num_functions()
    }

    pub fn dim_interior(&self) -> usize {
        self.dim_full().saturating_sub(2)
    }

    /// Nonempty knot spans `(a, b)` in increasing order.
    pub fn elements(&self) -> Vec<(T, T)> {
        self.knots
            .breaks()
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Support `[a, b]` of full-basis function `j`.
    pub fn support(&self, j: usize) -> (T, T) {
        let p = self.degree();
        (self.knots.knots[j], self.knots.knots[j + p + 1])
    }

    /// Knot span index `s` with `xi_s <= x < xi_{s+1}`; `x = 1` maps to the last nonempty span.
    fn find_span(&self, x: T) -> usize {
        let u = &self.knots.knots;
        let p = self.degree();
        let m = self.dim_full();
        if x >= u[m] {
            return m - 1;
        }
        let (mut lo, mut hi) = (p, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < u[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Evaluates the `p + 1` active functions and their derivatives up to `nders` at `x`.
    ///
    /// Derivatives of order above the degree are returned as zeros.
    pub fn eval_ders(&self, x: T, nders: usize) -> Result<BasisEval<T>> {
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::OutOfDomain(x.as_f64()));
        }
        Ok(self.eval_ders_unchecked(x, nders))
    }

    pub(crate) fn eval_ders_unchecked(&self, x: T, nders: usize) -> BasisEval<T> {
        let p = self.degree();
        let u = &self.knots.knots;
        let span = self.find_span(x);
        let mut ndu = vec![vec![T::zero(); p + 1]; p + 1];
        let mut left = vec![T::zero(); p + 1];
        let mut right = vec![T::zero(); p + 1];
        ndu[0][0] = T::one();
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![T::zero(); p + 1]; nders + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n = nders.min(p);
        let mut a = [vec![T::zero(); p + 1], vec![T::zero(); p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = T::one();
            for k in 1..=n {
                let mut d = T::zero();
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2: usize = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = T::from_usize_lossy(p);
        for k in 1..=n {
            for v in ders[k].iter_mut() {
                *v *= fac;
            }
            fac *= T::from_usize_lossy(p - k);
        }
        BasisEval {
            first: span - p,
            values: ders,
        }
    }

    /// Values of the `deriv`-th derivative (0..=2) of the active functions at `x`.
    ///
    /// Returns the full-basis index of the first active function together with
    /// the `p + 1` values.
    pub fn eval_basis(&self, x: T, deriv: usize) -> Result<(usize, Vec<T>)> {
        if deriv > 2 {
            return Err(Error::InvalidArgument(format!(
                "derivative order {deriv} not supported (max 2)"
            )));
        }
        let mut ev = self.eval_ders(x, deriv)?;
        Ok((ev.first, ev.values.swap_remove(deriv)))
    }

    /// Greville abscissae of the full basis, `tau_j = (xi_{j+1} + ... + xi_{j+p}) / p`.
    pub fn greville_full(&self) -> Vec<T> {
        let p = self.degree();
        let u = &self.knots.knots;
        let inv_p = T::one() / T::from_usize_lossy(p);
        (0..self.dim_full())
            .map(|j| u[j + 1..=j + p].iter().fold(T::zero(), |s, &k| s + k) * inv_p)
            .collect()
    }

    /// Greville abscissae of the interior functions (collocation points).
    pub fn greville_points(&self) -> Vec<T> {
        let full = self.greville_full();
        full[1..full.len() - 1].to_vec()
    }
}

/// Flattens a multi-index with direction 0 varying fastest.
pub fn flatten_index(mi: &[usize], dims: &[usize]) -> Result<usize> {
    if mi.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: mi.len(),
        });
    }
    let mut idx = 0;
    let mut stride = 1;
    for (&i, &n) in mi.iter().zip(dims) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        idx += stride * i;
        stride *= n;
    }
    Ok(idx)
}

/// Inverse of [`flatten_index`].
pub fn unflatten_index(idx: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    if idx >= total {
        return Err(Error::IndexOutOfRange {
            index: idx,
            len: total,
        });
    }
    let mut rem = idx;
    Ok(dims
        .iter()
        .map(|&n| {
            let i = rem % n;
            rem /= n;
            i
        })
        .collect())
}
