//! Gauss–Legendre rules for reference integrals and row-wise weighted quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::splines::{BasisEval, SplineSpace};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// Gauss–Legendre nodes and weights on `[0, 1]`, computed in `f64`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_q.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { x } else { p1 };
            let pqm1 = if q == 1 { 1.0 } else { p0 };
            dp = qf * (x * pq - pqm1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[q - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[q - 1 - i] = 0.5 * w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.5;
    }
    (nodes, weights)
}

/// Element-wise Gauss rule over the knot spans of a space.
#[derive(Debug, Clone)]
pub struct GaussRule<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
    pub points_per_element: usize,
}

impl<T: Real> GaussRule<T> {
    pub fn num_elements(&self) -> usize {
        self.points.len() / self.points_per_element
    }

    /// Point indices belonging to element `e`.
    pub fn element_range(&self, e: usize) -> Range<usize> {
        e * self.points_per_element..(e + 1) * self.points_per_element
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// Maps `points_per_element` Gauss–Legendre nodes onto every nonempty knot span.
pub fn gauss_rule<T: Real>(
    space: &SplineSpace<T>,
    points_per_element: usize,
) -> Result<GaussRule<T>> {
    if points_per_element < 1 {
        return Err(Error::InvalidArgument(
            "points_per_element must be >= 1".into(),
        ));
    }
    let (nodes, weights) = gauss_legendre(points_per_element);
    let elements = space.elements();
    let mut pts = Vec::with_capacity(elements.len() * points_per_element);
    let mut wts = Vec::with_capacity(elements.len() * points_per_element);
    for (a, b) in elements {
        let len = b - a;
        for (&x, &w) in nodes.iter().zip(&weights) {
            pts.push(a + len * T::lit(x));
            wts.push(len * T::lit(w));
        }
    }
    Ok(GaussRule {
        points: pts,
        weights: wts,
        points_per_element,
    })
}

/// Index of the weight set for test-derivative order `a` and trial-derivative order `b`.
#[inline]
pub fn wq_pair(a: usize, b: usize) -> usize {
    2 * a + b
}

/// Row-wise weighted quadrature for one direction.
///
/// For every interior row `i` and derivative pair `(a, b)` the weights satisfy
/// `sum_q w[i][q] * B_j^(b)(x_q) = int B_i^(a) B_j^(b)` for every full-basis
/// `j` whose support overlaps that of `B_i`.
#[derive(Debug, Clone)]
pub struct WqRule<T> {
    /// Global sorted quadrature points.
    pub points: Vec<T>,
    /// For interior row `i`, the contiguous point range inside `supp(B_i)`.
    pub rows: Vec<Range<usize>>,
    /// `weights[wq_pair(a, b)][i][k]` is the weight of point `rows[i].start + k`.
    pub weights: [Vec<Vec<T>>; 4],
    /// Basis values (derivatives 0 and 1) at every global point.
    pub basis: Vec<BasisEval<T>>,
    pub degree: usize,
}

impl<T: Real> WqRule<T> {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Largest number of points inside any row support.
    pub fn max_points_per_row(&self) -> usize {
        self.rows.iter().map(|r| r.len()).max().unwrap_or(0)
    }
}

/// Quadrature point layout: all break points, one midpoint per interior span,
/// and `p` equispaced points in the first and last spans so that boundary rows
/// have at least as many points as exactness conditions.
fn wq_points<T: Real>(space: &SplineSpace<T>) -> Vec<T> {
    let p = space.degree();
    let elements = space.elements();
    let ne = elements.len();
    let mut pts = Vec::new();
    for (e, &(a, b)) in elements.iter().enumerate() {
        pts.push(a);
        let inner = if e == 0 || e + 1 == ne { p } else { 1 };
        for k in 1..=inner {
            pts.push(a + (b - a) * T::lit(k as f64 / (inner + 1) as f64));
        }
    }
    pts.push(elements[ne - 1].1);
    pts
}

/// Minimum-norm solution of the wide, full-row-rank system `phi w = rhs`
/// from a QR factorization of `phi^T`: `w = Q R^-T rhs`.
fn min_norm_solve<T: Real>(phi: &DMatrix<T>, rhs: &DVector<T>) -> Option<DVector<T>> {
    let qr = phi.transpose().qr();
    let y = qr.r().transpose().solve_lower_triangular(rhs)?;
    Some(qr.q() * y)
}

/// Builds the weighted quadrature rule of a space for all four derivative pairs.
pub fn build_wq_rule<T: Real>(space: &SplineSpace<T>) -> Result<WqRule<T>> {
    let p = space.degree();
    let m = space.dim_full();
    let points = wq_points(space);
    let basis: Vec<BasisEval<T>> = points
        .iter()
        .map(|&x| space.eval_ders_unchecked(x, 1))
        .collect();

    // exact reference integrals per element
    let gauss = gauss_rule(space, p + 1)?;
    let gauss_eval: Vec<BasisEval<T>> = gauss
        .points
        .iter()
        .map(|&x| space.eval_ders_unchecked(x, 1))
        .collect();
    let elements = space.elements();
    let integral = |i: usize, a: usize, j: usize, b: usize| -> T {
        let (lo_i, hi_i) = space.support(i);
        let (lo_j, hi_j) = space.support(j);
        let (lo, hi) = (lo_i.max(lo_j), hi_i.min(hi_j));
        let mut acc = T::zero();
        for (e, &(ea, eb)) in elements.iter().enumerate() {
            if ea < lo || eb > hi {
                continue;
            }
            for q in gauss.element_range(e) {
                let ev = &gauss_eval[q];
                acc += gauss.weights[q] * ev.get(a, i) * ev.get(b, j);
            }
        }
        acc
    };

    let tol = T::lit(1e-12).max(T::eps() * T::lit(1e4));
    let n = m - 2;
    let mut rows = Vec::with_capacity(n);
    let mut weights: [Vec<Vec<T>>; 4] = Default::default();
    for row in 0..n {
        let i = row + 1;
        let (lo, hi) = space.support(i);
        let start = points.partition_point(|&x| x < lo);
        let end = points.partition_point(|&x| x <= hi);
        let range = start..end;
        let overlapping: Vec<usize> = (i.saturating_sub(p)..=(i + p).min(m - 1))
            .filter(|&j| {
                let (a, b) = space.support(j);
                lo.max(a) < hi.min(b)
            })
            .collect();
        for a in 0..2 {
            for b in 0..2 {
                let phi = DMatrix::from_fn(overlapping.len(), range.len(), |c, k| {
                    basis[start + k].get(b, overlapping[c])
                });
                let rhs = DVector::from_iterator(
                    overlapping.len(),
                    overlapping.iter().map(|&j| integral(i, a, j, b)),
                );
                // derivatives of all functions active on the support sum to zero,
                // so one derivative condition is implied by the others
                let k = if b == 1 { phi.nrows() - 1 } else { phi.nrows() };
                let w = min_norm_solve(&phi.rows(0, k).into_owned(), &rhs.rows(0, k).into_owned())
                    .ok_or(Error::DegenerateQuadrature { row, residual: f64::INFINITY })?;
                let residual = (&phi * &w - &rhs).amax();
                let scale = rhs.amax().max(T::one());
                if !(residual <= tol * scale) {
                    return Err(Error::DegenerateQuadrature {
                        row,
                        residual: residual.as_f64(),
                    });
                }
                weights[wq_pair(a, b)].push(w.iter().copied().collect());
            }
        }
        rows.push(range);
    }
    Ok(WqRule {
        points,
        rows,
        weights,
        basis,
        degree: p,
    })
}

/// Test-function-weighted Gauss rule in the same row layout as [`WqRule`]:
/// `weights[wq_pair(a, b)][i][k] = w_q B_i^(a)(x_q)`. Assembling with it gives
/// the exact Galerkin matrix whenever the Gauss rule integrates the integrand.
pub fn gauss_row_rule<T: Real>(
    space: &SplineSpace<T>,
    points_per_element: usize,
) -> Result<WqRule<T>> {
    let gauss = gauss_rule(space, points_per_element)?;
    let basis: Vec<BasisEval<T>> = gauss
        .points
        .iter()
        .map(|&x| space.eval_ders_unchecked(x, 1))
        .collect();
    let n = space.dim_interior();
    let mut rows = Vec::with_capacity(n);
    let mut weights: [Vec<Vec<T>>; 4] = Default::default();
    for row in 0..n {
        let i = row + 1;
        let (lo, hi) = space.support(i);
        let start = gauss.points.partition_point(|&x| x < lo);
        let end = gauss.points.partition_point(|&x| x <= hi);
        for a in 0..2 {
            let w: Vec<T> = (start..end)
                .map(|q| gauss.weights[q] * basis[q].get(a, i))
                .collect();
            for b in 0..2 {
                weights[wq_pair(a, b)].push(w.clone());
            }
        }
        rows.push(start..end);
    }
    Ok(WqRule {
        points: gauss.points,
        rows,
        weights,
        basis,
        degree: space.degree(),
    })
}
