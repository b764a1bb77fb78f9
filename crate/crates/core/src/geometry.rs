//! Tensor-product spline and NURBS geometry maps, the pulled-back diffusion
//! coefficient `Q`, and the two benchmark domains.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::splines::{BasisEval, KnotVector, SplineSpace};
use nalgebra::DMatrix;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Map `F: [0,1]^d -> R^d` given by control points (and optional weights) over
/// a tensor-product full basis. Control points are stored with direction 0
/// varying fastest.
#[derive(Debug, Clone)]
pub struct GeometryMap<T: Real> {
    name: String,
    spaces: Vec<SplineSpace<T>>,
    control_points: Vec<Vec<T>>,
    weights: Option<Vec<T>>,
    identity: bool,
}

/// Value, Jacobian and (optionally) Hessians of the map at one parametric point.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEval<T: Real> {
    pub x: Vec<T>,
    /// `jac[(k, a)] = dF_k / dxi_a`.
    pub jac: DMatrix<T>,
    /// `hess[k][(a, b)] = d^2 F_k / dxi_a dxi_b`; empty unless requested.
    pub hess: Vec<DMatrix<T>>,
}

impl<T: Real> MapEval<T> {
    pub fn det(&self) -> T {
        self.jac.determinant()
    }
}

#[derive(Serialize)]
struct GeometryJson<'a> {
    name: &'a str,
    degrees: Vec<usize>,
    knots: Vec<Vec<f64>>,
    control_points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl<T: Real> GeometryMap<T> {
    pub fn new(
        name: impl Into<String>,
        spaces: Vec<SplineSpace<T>>,
        control_points: Vec<Vec<T>>,
        weights: Option<Vec<T>>,
    ) -> Result<Self> {
        let d = spaces.len();
        if !(2..=3).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "geometry dimension must be 2 or 3, got {d}"
            )));
        }
        let count: usize = spaces.iter().map(|s| s.dim_full()).product();
        if control_points.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count,
                got: control_points.len(),
            });
        }
        if let Some(c) = control_points.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
        if let Some(w) = &weights {
            if w.len() != count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: w.len(),
                });
            }
            if w.iter().any(|&w| !(w > T::zero())) {
                return Err(Error::InvalidArgument(
                    "NURBS weights must be positive".into(),
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            spaces,
            control_points,
            weights,
            identity: false,
        })
    }

    /// The identity map of the unit square or cube.
    pub fn identity(d: usize) -> Result<Self> {
        let space = SplineSpace::full_basis(KnotVector::uniform(1, 1)?);
        let pts = (0..1usize << d)
            .map(|c| {
                (0..d)
                    .map(|l| if c >> l & 1 == 1 { T::one() } else { T::zero() })
                    .collect()
            })
            .collect();
        let mut g = Self::new("identity", vec![space; d], pts, None)?;
        g.identity = true;
        Ok(g)
    }

    /// Affine map `xi -> a xi + b`.
    pub fn affine(a: &DMatrix<T>, b: &[T]) -> Result<Self> {
        let d = b.len();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.nrows(),
            });
        }
        let space = SplineSpace::full_basis(KnotVector::uniform(1, 1)?);
        let pts = (0..1usize << d)
            .map(|c| {
                (0..d)
                    .map(|k| {
                        (0..d).fold(b[k], |s, l| if c >> l & 1 == 1 { s + a[(k, l)] } else { s })
                    })
                    .collect()
            })
            .collect();
        Self::new("affine", vec![space; d], pts, None)
    }

    /// Quarter annulus in the first quadrant centred at the origin.
    ///
    /// `xi_1` runs clockwise along the arcs from the `y` axis to the `x` axis,
    /// `xi_2` runs radially from `inner` to `outer`.
    pub fn quarter_ring(inner: T, outer: T) -> Result<Self> {
        if !(inner > T::zero() && outer > inner) {
            return Err(Error::InvalidArgument(
                "quarter ring needs 0 < inner < outer".into(),
            ));
        }
        let arc = SplineSpace::full_basis(KnotVector::uniform(1, 2)?);
        let radial = SplineSpace::full_basis(KnotVector::uniform(1, 1)?);
        let z = T::zero();
        let w = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let mut pts = Vec::new();
        let mut weights = Vec::new();
        for r in [inner, outer] {
            pts.extend([vec![z, r], vec![r, r], vec![r, z]]);
            weights.extend([T::one(), w, T::one()]);
        }
        Self::new("quarter_ring", vec![arc, radial], pts, Some(weights))
    }

    /// Quarter ring with radii 1 and 2.
    pub fn default_quarter_ring() -> Self {
        Self::quarter_ring(T::one(), T::lit(2.0)).expect("valid radii")
    }

    /// Solid obtained by revolving the quarter ring (radii 1, 2, placed in the
    /// plane `z = 0`) by a quarter turn about the axis through `(-1, -1, -1)`
    /// with direction `(0, 1, 0)`. The third parameter is the angle of revolution.
    pub fn revolved_quarter_ring() -> Self {
        let ring = Self::default_quarter_ring();
        let rev = SplineSpace::full_basis(KnotVector::uniform(1, 2).expect("valid knots"));
        let w = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let c = -T::one();
        let ring_w = ring.weights.clone().expect("ring is rational");
        let mut pts = Vec::new();
        let mut weights = Vec::new();
        for (k, wk) in [(0, T::one()), (1, w), (2, T::one())] {
            for (p, &pw) in ring.control_points.iter().zip(&ring_w) {
                // offsets from the axis in the xz-plane
                let (rx, ry, rz) = (p[0] - c, p[1], T::zero() - c);
                let (qx, qz) = match k {
                    0 => (rx, rz),
                    // corner of the quarter-turn control polygon
                    1 => (rx - rz, rz + rx),
                    _ => (-rz, rx),
                };
                pts.push(vec![c + qx, ry, c + qz]);
                weights.push(pw * wk);
            }
        }
        let mut spaces = ring.spaces.clone();
        spaces.push(rev);
        Self::new("revolved_quarter_ring", spaces, pts, Some(weights)).expect("valid geometry")
    }

    /// Looks up a benchmark geometry by name.
    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        match name {
            "identity" | "square" | "cube" => Self::identity(d),
            "quarter_ring" => Ok(Self::default_quarter_ring()),
            "revolved_quarter_ring" | "revolved_ring" => Ok(Self::revolved_quarter_ring()),
            _ => Err(Error::InvalidArgument(format!("unknown geometry {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[SplineSpace<T>] {
        &self.spaces
    }

    pub fn control_points(&self) -> &[Vec<T>] {
        &self.control_points
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    /// True for the identity map (and its refinements).
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Univariate basis data in direction `l` at `t`, as consumed by [`Self::eval_with`].
    pub fn basis(&self, l: usize, t: T, nders: usize) -> Result<BasisEval<T>> {
        self.spaces[l].eval_ders(t, nders)
    }

    pub fn eval(&self, xi: &[T]) -> Result<MapEval<T>> {
        self.eval_map(xi, false)
    }

    /// Evaluates `F`, its Jacobian and, if `hessian`, its second derivatives.
    pub fn eval_map(&self, xi: &[T], hessian: bool) -> Result<MapEval<T>> {
        let d = self.dim();
        if xi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: xi.len(),
            });
        }
        let nd = if hessian { 2 } else { 1 };
        let evals: Vec<BasisEval<T>> = (0..d)
            .map(|l| self.basis(l, xi[l], nd))
            .collect::<Result<_>>()?;
        let refs: Vec<&BasisEval<T>> = evals.iter().collect();
        Ok(self.eval_with(&refs, hessian))
    }

    /// Homogeneous coordinates `(w F, w)` and their first/second derivatives.
    fn homogeneous(
        &self,
        evals: &[&BasisEval<T>],
        nd: usize,
    ) -> (Vec<T>, Vec<Vec<T>>, Vec<Vec<Vec<T>>>) {
        let d = self.dim();
        let dims: Vec<usize> = self.spaces.iter().map(|s| s.dim_full()).collect();
        let counts: Vec<usize> = evals.iter().map(|e| e.values[0].len()).collect();
        let total: usize = counts.iter().product();
        // component d of each vector is the weight
        let mut val = vec![T::zero(); d + 1];
        let mut grad = vec![vec![T::zero(); d + 1]; d];
        let mut hess = vec![vec![vec![T::zero(); d + 1]; d]; if nd >= 2 { d } else { 0 }];
        let mut local = vec![0usize; d];
        for _ in 0..total {
            let mut idx = 0;
            let mut stride = 1;
            for l in 0..d {
                idx += stride * (evals[l].first + local[l]);
                stride *= dims[l];
            }
            let w = self.weights.as_ref().map_or(T::one(), |w| w[idx]);
            let cp = &self.control_points[idx];
            let b = |l: usize, k: usize| evals[l].values[k][local[l]];
            let basis_der =
                |orders: &[usize]| -> T { (0..d).fold(T::one(), |s, l| s * b(l, orders[l])) };
            let mut orders = vec![0usize; d];
            let n0 = basis_der(&orders);
            for k in 0..d {
                val[k] += n0 * w * cp[k];
            }
            val[d] += n0 * w;
            for a in 0..d {
                orders.iter_mut().for_each(|o| *o = 0);
                orders[a] = 1;
                let na = basis_der(&orders);
                for k in 0..d {
                    grad[a][k] += na * w * cp[k];
                }
                grad[a][d] += na * w;
                if nd >= 2 {
                    for bb in 0..d {
                        orders.iter_mut().for_each(|o| *o = 0);
                        orders[a] += 1;
                        orders[bb] += 1;
                        let nab = basis_der(&orders);
                        for k in 0..d {
                            hess[a][bb][k] += nab * w * cp[k];
                        }
                        hess[a][bb][d] += nab * w;
                    }
                }
            }
            for l in 0..d {
                local[l] += 1;
                if local[l] < counts[l] {
                    break;
                }
                local[l] = 0;
            }
        }
        (val, grad, hess)
    }

    /// Evaluates the map from precomputed univariate basis data (one per
    /// direction, with derivatives up to 1, or 2 when `hessian`).
    pub fn eval_with(&self, evals: &[&BasisEval<T>], hessian: bool) -> MapEval<T> {
        let d = self.dim();
        let (a, ga, ha) = self.homogeneous(evals, if hessian { 2 } else { 1 });
        let w = a[d];
        let x: Vec<T> = (0..d).map(|k| a[k] / w).collect();
        let jac = DMatrix::from_fn(d, d, |k, i| (ga[i][k] - x[k] * ga[i][d]) / w);
        let hess = if hessian {
            (0..d)
                .map(|k| {
                    DMatrix::from_fn(d, d, |i, j| {
                        (ha[i][j][k]
                            - jac[(k, i)] * ga[j][d]
                            - jac[(k, j)] * ga[i][d]
                            - x[k] * ha[i][j][d])
                            / w
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        MapEval { x, jac, hess }
    }

    /// Physical point `F(xi)`.
    pub fn point(&self, xi: &[T]) -> Result<Vec<T>> {
        Ok(self.eval(xi)?.x)
    }

    /// Re-represents the map in finer spaces (knot insertion and/or degree
    /// elevation) by interpolating the homogeneous coordinates at the Greville
    /// points of the target spaces. Exact whenever each target space contains
    /// the current one.
    pub fn refined(&self, targets: Vec<SplineSpace<T>>) -> Result<Self> {
        let d = self.dim();
        if targets.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: targets.len(),
            });
        }
        let dims: Vec<usize> = targets.iter().map(|s| s.dim_full()).collect();
        let total: usize = dims.iter().product();
        let grevilles: Vec<Vec<T>> = targets.iter().map(|s| s.greville_full()).collect();
        // samples of the homogeneous coordinates on the tensor Greville grid
        let evals: Vec<Vec<BasisEval<T>>> = (0..d)
            .map(|l| {
                grevilles[l]
                    .iter()
                    .map(|&t| self.spaces[l].eval_ders_unchecked(t, 1))
                    .collect()
            })
            .collect();
        let mut samples: Vec<Vec<T>> = vec![Vec::with_capacity(total); d + 1];
        let mut mi = vec![0usize; d];
        for _ in 0..total {
            let refs: Vec<&BasisEval<T>> = (0..d).map(|l| &evals[l][mi[l]]).collect();
            let (a, _, _) = self.homogeneous(&refs, 1);
            for k in 0..=d {
                samples[k].push(a[k]);
            }
            for l in 0..d {
                mi[l] += 1;
                if mi[l] < dims[l] {
                    break;
                }
                mi[l] = 0;
            }
        }
        let inverses: Vec<DMatrix<T>> = targets
            .iter()
            .zip(&grevilles)
            .map(|(s, g)| {
                let m = s.dim_full();
                let mut c = DMatrix::zeros(m, m);
                for (i, &t) in g.iter().enumerate() {
                    let ev = s.eval_ders_unchecked(t, 0);
                    for (r, &v) in ev.values[0].iter().enumerate() {
                        c[(i, ev.first + r)] = v;
                    }
                }
                c.try_inverse()
                    .ok_or_else(|| Error::Singular("Greville interpolation matrix".into()))
            })
            .collect::<Result<_>>()?;
        let inv_refs: Vec<&DMatrix<T>> = inverses.iter().collect();
        let coeffs: Vec<Vec<T>> = samples
            .iter()
            .map(|s| crate::tensor::kron_apply(&inv_refs, &dims, s))
            .collect();
        let weights: Vec<T> = coeffs[d].clone();
        let pts = (0..total)
            .map(|i| (0..d).map(|k| coeffs[k][i] / weights[i]).collect())
            .collect();
        let weights = if self.weights.is_some() {
            Some(weights)
        } else {
            None
        };
        let mut g = Self::new(self.name.clone(), targets, pts, weights)?;
        g.identity = self.identity;
        Ok(g)
    }

    /// Solves `F(xi) = x` by Newton's method; fails if the iteration leaves the
    /// parametric domain or does not converge.
    pub fn inverse(&self, x: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        let half = T::lit(0.5);
        let mut xi = vec![half; d];
        let tol = T::eps() * T::lit(64.0);
        for _ in 0..100 {
            let ev = self.eval(&xi)?;
            let r = nalgebra::DVector::from_iterator(d, (0..d).map(|k| ev.x[k] - x[k]));
            let step = ev
                .jac
                .clone()
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Singular("Jacobian in Newton inverse".into()))?;
            for l in 0..d {
                xi[l] = (xi[l] - step[l]).max(T::zero()).min(T::one());
            }
            if step.amax() <= tol {
                return Ok(xi);
            }
        }
        Err(Error::NoConvergence("inverse map Newton iteration".into()))
    }

    /// Minimum of `det J_F` over an `s^d` grid of parametric points.
    pub fn min_det_on_grid(&self, s: usize) -> Result<T> {
        let d = self.dim();
        let mut min = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
        let total = s.pow(d as u32);
        for i in 0..total {
            let xi: Vec<T> = crate::splines::unflatten_index(i, &vec![s; d])?
                .into_iter()
                .map(|k| T::from_usize_lossy(k) / T::from_usize_lossy(s - 1))
                .collect();
            min = min.min(self.eval(&xi)?.det());
        }
        Ok(min)
    }

    /// JSON dump of degrees, knots, control points and weights.
    pub fn to_json(&self) -> String {
        let doc = GeometryJson {
            name: &self.name,
            degrees: self.spaces.iter().map(|s| s.degree()).collect(),
            knots: self
                .spaces
                .iter()
                .map(|s| s.knot_vector().knots().iter().map(|k| k.as_f64()).collect())
                .collect(),
            control_points: self
                .control_points
                .iter()
                .map(|c| c.iter().map(|v| v.as_f64()).collect())
                .collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| w.iter().map(|v| v.as_f64()).collect()),
        };
        serde_json::to_string_pretty(&doc).expect("geometry serializes")
    }
}

type MatrixFn<T> = Arc<dyn Fn(&[T]) -> DMatrix<T> + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
enum CoefficientKind<T: Real> {
    Identity,
    Constant(DMatrix<T>),
    Variable {
        k: MatrixFn<T>,
        div: Option<VectorFn<T>>,
    },
}

/// Symmetric positive definite diffusion tensor `K(x)`.
#[derive(Clone)]
pub struct DiffusionCoefficient<T: Real> {
    d: usize,
    kind: CoefficientKind<T>,
}

impl<T: Real> fmt::Debug for DiffusionCoefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            CoefficientKind::Identity => "identity".to_string(),
            CoefficientKind::Constant(m) => format!("constant {m:?}"),
            CoefficientKind::Variable { div, .. } => {
                format!("variable (divergence: {})", div.is_some())
            }
        };
        write!(f, "DiffusionCoefficient {{ d: {}, {kind} }}", self.d)
    }
}

impl<T: Real> DiffusionCoefficient<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            d,
            kind: CoefficientKind::Identity,
        }
    }

    /// Constant tensor; must be symmetric.
    pub fn constant(k: DMatrix<T>) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidArgument(
                "diffusion tensor must be square".into(),
            ));
        }
        let scale = k.amax().max(T::one());
        if (&k - k.transpose()).amax() > T::eps() * T::lit(16.0) * scale {
            return Err(Error::InvalidArgument(
                "diffusion tensor must be symmetric".into(),
            ));
        }
        Ok(Self {
            d: k.nrows(),
            kind: CoefficientKind::Constant(k),
        })
    }

    /// Space-dependent tensor. `div` returns the vector with entries
    /// `sum_j dK_ij / dx_j`; collocation needs it.
    pub fn variable(
        d: usize,
        k: impl Fn(&[T]) -> DMatrix<T> + Send + Sync + 'static,
        div: Option<Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>>,
    ) -> Self {
        Self {
            d,
            kind: CoefficientKind::Variable {
                k: Arc::new(k),
                div: div.map(Arc::from),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, CoefficientKind::Identity)
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self.kind, CoefficientKind::Variable { .. })
    }

    pub fn has_divergence(&self) -> bool {
        match &self.kind {
            CoefficientKind::Variable { div, .. } => div.is_some(),
            _ => true,
        }
    }

    pub fn eval(&self, x: &[T]) -> DMatrix<T> {
        match &self.kind {
            CoefficientKind::Identity => DMatrix::identity(self.d, self.d),
            CoefficientKind::Constant(m) => m.clone(),
            CoefficientKind::Variable { k, .. } => k(x),
        }
    }

    /// Row-wise divergence of `K` at `x`, or `None` if unknown.
    pub fn divergence(&self, x: &[T]) -> Option<Vec<T>> {
        match &self.kind {
            CoefficientKind::Variable { div, .. } => div.as_ref().map(|f| f(x)),
            _ => Some(vec![T::zero(); self.d]),
        }
    }

    /// `c K`.
    pub fn scaled(&self, c: T) -> Self {
        let kind = match &self.kind {
            CoefficientKind::Identity => {
                CoefficientKind::Constant(DMatrix::identity(self.d, self.d) * c)
            }
            CoefficientKind::Constant(m) => CoefficientKind::Constant(m * c),
            CoefficientKind::Variable { k, div } => {
                let k = k.clone();
                let div = div.clone();
                CoefficientKind::Variable {
                    k: Arc::new(move |x: &[T]| k(x) * c),
                    div: div.map(|f| {
                        Arc::new(move |x: &[T]| f(x).into_iter().map(|v| v * c).collect::<Vec<T>>())
                            as VectorFn<T>
                    }),
                }
            }
        };
        Self { d: self.d, kind }
    }
}

/// `Q = det(J) J^{-1} K(F) J^{-T}` from an evaluated map.
pub fn q_from_eval<T: Real>(ev: &MapEval<T>, k: &DiffusionCoefficient<T>) -> Result<DMatrix<T>> {
    let det = ev.det();
    let scale = ev.jac.amax();
    if !(det > T::eps() * scale.powi(ev.jac.nrows() as i32)) {
        return Err(Error::SingularJacobian {
            point: ev.x.iter().map(|v| v.as_f64()).collect(),
            det: det.as_f64(),
        });
    }
    let inv = ev
        .jac
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian {
            point: ev.x.iter().map(|v| v.as_f64()).collect(),
            det: det.as_f64(),
        })?;
    let q = &inv * k.eval(&ev.x) * inv.transpose() * det;
    // symmetrize away rounding
    Ok((&q + q.transpose()) * T::lit(0.5))
}

/// Coefficient matrix `Q(xi)` of the pulled-back operator.
pub fn coefficient_matrix_q<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    xi: &[T],
) -> Result<DMatrix<T>> {
    q_from_eval(&g.eval(xi)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let g = GeometryMap::<f64>::identity(3).unwrap();
        let ev = g.eval_map(&[0.3, 0.7, 0.1], true).unwrap();
        assert!((ev.x[0] - 0.3).abs() < 1e-15 && (ev.x[1] - 0.7).abs() < 1e-15);
        assert!((ev.jac.clone() - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert!(ev.hess.iter().all(|h| h.amax() < 1e-14));
        let q =
            coefficient_matrix_q(&g, &DiffusionCoefficient::identity(3), &[0.5, 0.5, 0.5]).unwrap();
        assert!((q - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn ring_corner() {
        let g = GeometryMap::<f64>::default_quarter_ring();
        let ev = g.eval(&[0.0, 0.0]).unwrap();
        assert!(ev.x[0].abs() < 1e-15 && (ev.x[1] - 1.0).abs() < 1e-15);
        assert!(ev.det() > 0.0);
    }

    #[test]
    fn singular_jacobian_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let g = GeometryMap::<f64>::affine(&a, &[0.0, 0.0]).unwrap();
        let err = coefficient_matrix_q(&g, &DiffusionCoefficient::identity(2), &[0.5, 0.5]);
        assert!(matches!(err, Err(Error::SingularJacobian { .. })));
        assert!(GeometryMap::<f64>::by_name("torus", 2).is_err());
    }

    #[test]
    fn json_export() {
        let g = GeometryMap::<f64>::default_quarter_ring();
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(v["control_points"].as_array().unwrap().len(), 6);
        assert_eq!(v["degrees"], serde_json::json!([2, 1]));
    }
}
