//! System matrices for collocation, weighted-quadrature Galerkin and exact
//! Galerkin discretizations, the H1 Gram matrix, and load vectors.
//!
//! Unknowns are the interior tensor-product functions, flattened with
//! direction 0 fastest.

use crate::error::{Error, Result};
use crate::geometry::{q_from_eval, DiffusionCoefficient, GeometryMap, MapEval};
use crate::quadrature::{build_wq_rule, gauss_row_rule, gauss_rule, wq_pair, GaussRule, WqRule};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::splines::{BasisEval, SplineSpace};
use crate::tensor::{kron_apply, mode_product, KroneckerSumOperator};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Discretization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Collocation,
    Wq,
    Galerkin,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Collocation => "collocation",
            Method::Wq => "wq",
            Method::Galerkin => "galerkin",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "collocation" | "c" => Ok(Method::Collocation),
            "wq" | "weighted_quadrature" => Ok(Method::Wq),
            "galerkin" | "g" => Ok(Method::Galerkin),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptor {
    pub method: Method,
    pub degree: usize,
    /// Mesh size of direction 0.
    pub h: f64,
    pub geometry: String,
    pub dims: Vec<usize>,
}

/// Assembled operator: Kronecker form on the parametric domain, sparse otherwise.
#[derive(Debug, Clone)]
pub enum SystemOperator<T: Real> {
    Kronecker(KroneckerSumOperator<T>),
    Sparse(CsrMatrix<T>),
}

impl<T: Real> SystemOperator<T> {
    pub fn size(&self) -> usize {
        match self {
            SystemOperator::Kronecker(k) => k.size(),
            SystemOperator::Sparse(s) => s.nrows(),
        }
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        match self {
            SystemOperator::Kronecker(k) => k.kron_matvec(v),
            SystemOperator::Sparse(s) => s.matvec(v),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix<T> {
        match self {
            SystemOperator::Kronecker(k) => kronecker_to_csr(k),
            SystemOperator::Sparse(s) => s.clone(),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<T>> {
        match self {
            SystemOperator::Kronecker(k) => k.dense_materialize(),
            SystemOperator::Sparse(s) => {
                let n = s.nrows();
                if n > crate::tensor::DENSE_LIMIT {
                    return Err(Error::TooLarge {
                        size: n,
                        limit: crate::tensor::DENSE_LIMIT,
                    });
                }
                Ok(s.to_dense())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem<T: Real> {
    pub operator: SystemOperator<T>,
    pub rhs: Vec<T>,
    pub descriptor: Descriptor,
}

/// Univariate factors `M_l`, `K_l` of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateMatrices<T: Real> {
    pub mass: DMatrix<T>,
    pub stiffness: DMatrix<T>,
}

fn interior_block<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows() - 2;
    m.view((1, 1), (n, n)).into_owned()
}

/// Collocation factors with the full basis as columns: `n x m` matrices
/// `B_j(tau_i)` and `-B_j''(tau_i)` at the interior Greville points.
pub fn univariate_collocation_matrices_full<T: Real>(
    space: &SplineSpace<T>,
) -> UnivariateMatrices<T> {
    let tau = space.greville_points();
    let m = space.dim_full();
    let mut mass = DMatrix::zeros(tau.len(), m);
    let mut stiffness = DMatrix::zeros(tau.len(), m);
    for (i, &t) in tau.iter().enumerate() {
        let ev = space.eval_ders_unchecked(t, 2);
        for r in 0..ev.values[0].len() {
            mass[(i, ev.first + r)] = ev.values[0][r];
            stiffness[(i, ev.first + r)] = -ev.values[2][r];
        }
    }
    UnivariateMatrices { mass, stiffness }
}

/// `(M^C)_ij = B_j(tau_i)`, `(K^C)_ij = -B_j''(tau_i)` over interior functions.
pub fn univariate_collocation_matrices<T: Real>(space: &SplineSpace<T>) -> UnivariateMatrices<T> {
    let full = univariate_collocation_matrices_full(space);
    let n = space.dim_interior();
    UnivariateMatrices {
        mass: full.mass.columns(1, n).into_owned(),
        stiffness: full.stiffness.columns(1, n).into_owned(),
    }
}

/// Full-basis `M_ij = int B_i B_j` and `K_ij = int B_i' B_j'`.
pub fn univariate_galerkin_matrices_full<T: Real>(
    space: &SplineSpace<T>,
    rule: &GaussRule<T>,
) -> UnivariateMatrices<T> {
    let m = space.dim_full();
    let mut mass = DMatrix::zeros(m, m);
    let mut stiffness = DMatrix::zeros(m, m);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let ev = space.eval_ders_unchecked(x, 1);
        let k = ev.values[0].len();
        for r in 0..k {
            for c in 0..k {
                mass[(ev.first + r, ev.first + c)] += w * (ev.values[0][r] * ev.values[0][c]);
                stiffness[(ev.first + r, ev.first + c)] += w * (ev.values[1][r] * ev.values[1][c]);
            }
        }
    }
    UnivariateMatrices { mass, stiffness }
}

/// Interior-function Galerkin mass and stiffness matrices.
pub fn univariate_galerkin_matrices<T: Real>(
    space: &SplineSpace<T>,
    rule: &GaussRule<T>,
) -> UnivariateMatrices<T> {
    let full = univariate_galerkin_matrices_full(space, rule);
    UnivariateMatrices {
        mass: interior_block(&full.mass),
        stiffness: interior_block(&full.stiffness),
    }
}

/// Full-basis advection matrix `H_ij = int w(x) B_i B_j'`.
pub fn univariate_advection_matrix_full<T: Real>(
    space: &SplineSpace<T>,
    rule: &GaussRule<T>,
    wind: impl Fn(T) -> T,
) -> DMatrix<T> {
    let m = space.dim_full();
    let mut h = DMatrix::zeros(m, m);
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let ev = space.eval_ders_unchecked(x, 1);
        let k = ev.values[0].len();
        let wx = w * wind(x);
        for r in 0..k {
            for c in 0..k {
                h[(ev.first + r, ev.first + c)] += wx * ev.values[0][r] * ev.values[1][c];
            }
        }
    }
    h
}

/// Interior-function advection matrix.
pub fn univariate_advection_matrix<T: Real>(
    space: &SplineSpace<T>,
    rule: &GaussRule<T>,
    wind: impl Fn(T) -> T,
) -> DMatrix<T> {
    interior_block(&univariate_advection_matrix_full(space, rule, wind))
}

/// Exact Galerkin factors with a Gauss rule of `p + 1` points per element.
pub fn galerkin_factors<T: Real>(spaces: &[SplineSpace<T>]) -> Result<Vec<UnivariateMatrices<T>>> {
    spaces
        .iter()
        .map(|s| {
            Ok(univariate_galerkin_matrices(
                s,
                &gauss_rule(s, s.degree() + 1)?,
            ))
        })
        .collect()
}

pub fn collocation_factors<T: Real>(spaces: &[SplineSpace<T>]) -> Vec<UnivariateMatrices<T>> {
    spaces.iter().map(univariate_collocation_matrices).collect()
}

/// Parametric-domain Laplacian `sum_l M_d ⊗ .. ⊗ K_l ⊗ .. ⊗ M_1`.
pub fn kronecker_form<T: Real>(
    factors: &[UnivariateMatrices<T>],
) -> Result<KroneckerSumOperator<T>> {
    let mass: Vec<_> = factors.iter().map(|f| f.mass.clone()).collect();
    let stiff: Vec<_> = factors.iter().map(|f| f.stiffness.clone()).collect();
    KroneckerSumOperator::laplacian_like(&mass, &stiff)
}

fn kronecker_to_csr<T: Real>(op: &KroneckerSumOperator<T>) -> CsrMatrix<T> {
    let dims = op.dims().to_vec();
    let d = dims.len();
    let n = op.size();
    // nonzeros of every factor row
    let nz: Vec<Vec<Vec<Vec<(usize, T)>>>> = op
        .terms()
        .iter()
        .map(|term| {
            term.iter()
                .map(|f| {
                    (0..f.nrows())
                        .map(|i| {
                            (0..f.ncols())
                                .filter(|&j| f[(i, j)] != T::zero())
                                .map(|j| (j, f[(i, j)]))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut row: BTreeMap<usize, T> = BTreeMap::new();
    let mut mi = vec![0usize; d];
    for _ in 0..n {
        row.clear();
        for term in &nz {
            let lists: Vec<&Vec<(usize, T)>> = (0..d).map(|l| &term[l][mi[l]]).collect();
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            let mut pos = vec![0usize; d];
            'outer: loop {
                let (mut col, mut stride, mut v) = (0, 1, T::one());
                for l in 0..d {
                    let (j, a) = lists[l][pos[l]];
                    col += stride * j;
                    stride *= dims[l];
                    v *= a;
                }
                *row.entry(col).or_insert(T::zero()) += v;
                for l in 0..d {
                    pos[l] += 1;
                    if pos[l] < lists[l].len() {
                        continue 'outer;
                    }
                    pos[l] = 0;
                }
                break;
            }
        }
        for (&c, &v) in &row {
            if v != T::zero() {
                indices.push(c);
                data.push(v);
            }
        }
        indptr.push(indices.len());
        for l in 0..d {
            mi[l] += 1;
            if mi[l] < dims[l] {
                break;
            }
            mi[l] = 0;
        }
    }
    CsrMatrix::from_raw(n, n, indptr, indices, data).expect("rows are sorted")
}

fn check_spaces<T: Real>(g: &GeometryMap<T>, spaces: &[SplineSpace<T>]) -> Result<Vec<usize>> {
    if spaces.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: spaces.len(),
        });
    }
    Ok(spaces.iter().map(|s| s.dim_interior()).collect())
}

fn descriptor<T: Real>(
    method: Method,
    g: &GeometryMap<T>,
    spaces: &[SplineSpace<T>],
) -> Descriptor {
    let s = &spaces[0];
    Descriptor {
        method,
        degree: s.degree(),
        h: 1.0 / s.elements().len() as f64,
        geometry: g.name().to_string(),
        dims: spaces.iter().map(|s| s.dim_interior()).collect(),
    }
}

/// Iterates a tensor grid with direction 0 fastest, yielding multi-indices.
fn for_each_multi_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = dims.iter().product();
    let mut mi = vec![0usize; dims.len()];
    for _ in 0..total {
        f(&mi);
        for l in 0..dims.len() {
            mi[l] += 1;
            if mi[l] < dims[l] {
                break;
            }
            mi[l] = 0;
        }
    }
}

/// Evaluates the map on a tensor grid of parametric points.
fn eval_map_on_grid<T: Real>(
    g: &GeometryMap<T>,
    grid: &[Vec<T>],
    hessian: bool,
) -> Result<Vec<MapEval<T>>> {
    let nd = if hessian { 2 } else { 1 };
    let evals: Vec<Vec<BasisEval<T>>> = grid
        .iter()
        .enumerate()
        .map(|(l, pts)| {
            pts.iter()
                .map(|&t| g.basis(l, t, nd))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let dims: Vec<usize> = grid.iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(dims.iter().product());
    for_each_multi_index(&dims, |mi| {
        let refs: Vec<&BasisEval<T>> = mi.iter().enumerate().map(|(l, &q)| &evals[l][q]).collect();
        out.push(g.eval_with(&refs, hessian));
    });
    Ok(out)
}

/// Collocation matrix through the chain rule on the mapped Greville points.
///
/// Row `i` holds `(L B_j o F^-1)(F(tau_i))` for `L u = -div(K grad u)`.
pub fn assemble_collocation_matrix<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
) -> Result<CsrMatrix<T>> {
    let dims = check_spaces(g, spaces)?;
    if !k.has_divergence() {
        return Err(Error::InvalidArgument(
            "collocation with a variable diffusion tensor needs its divergence".into(),
        ));
    }
    let d = dims.len();
    let tau: Vec<Vec<T>> = spaces.iter().map(|s| s.greville_points()).collect();
    let basis: Vec<Vec<BasisEval<T>>> = spaces
        .iter()
        .zip(&tau)
        .map(|(s, t)| t.iter().map(|&x| s.eval_ders_unchecked(x, 2)).collect())
        .collect();
    let maps = eval_map_on_grid(g, &tau, true)?;
    let n: usize = dims.iter().product();
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut failure = None;
    let mut row = 0;
    for_each_multi_index(&dims, |mi| {
        if failure.is_some() {
            return;
        }
        let ev = &maps[row];
        row += 1;
        let det = ev.det();
        let inv = match ev.jac.clone().try_inverse() {
            Some(inv) if det > T::zero() => inv,
            _ => {
                failure = Some(Error::SingularJacobian {
                    point: ev.x.iter().map(|v| v.as_f64()).collect(),
                    det: det.as_f64(),
                });
                return;
            }
        };
        let kx = k.eval(&ev.x);
        let gm = &inv * &kx * inv.transpose();
        let div = k.divergence(&ev.x).unwrap_or_else(|| vec![T::zero(); d]);
        let hk: Vec<T> = (0..d)
            .map(|c| {
                (0..d)
                    .flat_map(|a| (0..d).map(move |b| (a, b)))
                    .fold(T::zero(), |s, (a, b)| s + gm[(a, b)] * ev.hess[c][(a, b)])
            })
            .collect();
        let c1: Vec<T> = (0..d)
            .map(|a| (0..d).fold(T::zero(), |s, c| s + inv[(a, c)] * (hk[c] - div[c])))
            .collect();

        let ev1: Vec<&BasisEval<T>> = (0..d).map(|l| &basis[l][mi[l]]).collect();
        // interior columns active at this point, per direction
        let ranges: Vec<(usize, usize)> = (0..d)
            .map(|l| {
                let m = spaces[l].dim_full();
                let lo = ev1[l].first.max(1);
                let hi = (ev1[l].first + ev1[l].values[0].len()).min(m - 1);
                (lo, hi)
            })
            .collect();
        let counts: Vec<usize> = ranges
            .iter()
            .map(|&(lo, hi)| hi.saturating_sub(lo))
            .collect();
        for_each_multi_index(&counts, |local| {
            let js: Vec<usize> = (0..d).map(|l| ranges[l].0 + local[l]).collect();
            let b = |l: usize, k: usize| ev1[l].get(k, js[l]);
            let prod = |orders: &[usize]| (0..d).fold(T::one(), |s, l| s * b(l, orders[l]));
            let mut orders = vec![0usize; d];
            let mut v = T::zero();
            for a in 0..d {
                orders.iter_mut().for_each(|o| *o = 0);
                orders[a] = 1;
                v += c1[a] * prod(&orders);
                for bb in 0..d {
                    orders.iter_mut().for_each(|o| *o = 0);
                    orders[a] += 1;
                    orders[bb] += 1;
                    v -= gm[(a, bb)] * prod(&orders);
                }
            }
            if v != T::zero() {
                let mut col = 0;
                let mut stride = 1;
                for l in 0..d {
                    col += stride * (js[l] - 1);
                    stride *= dims[l];
                }
                indices.push(col);
                data.push(v);
            }
        });
        indptr.push(indices.len());
    });
    if let Some(e) = failure {
        return Err(e);
    }
    CsrMatrix::from_raw(n, n, indptr, indices, data)
}

/// One term `sum_q c(x_q) w^{(test, trial)}_{i,q} d^trial B_j(x_q)` of a row-rule assembly.
struct Term<T> {
    test: Vec<usize>,
    trial: Vec<usize>,
    coef: Vec<T>,
}

/// Sparse assembly from per-direction row rules by sum factorization.
///
/// Returns the matrix and the number of multiply-adds spent in the contractions.
fn assemble_with_row_rules<T: Real>(
    spaces: &[SplineSpace<T>],
    rules: &[WqRule<T>],
    terms: &[Term<T>],
) -> (CsrMatrix<T>, u64) {
    let d = spaces.len();
    let dims: Vec<usize> = spaces.iter().map(|s| s.dim_interior()).collect();
    let full: Vec<usize> = spaces.iter().map(|s| s.dim_full()).collect();
    let npts: Vec<usize> = rules.iter().map(|r| r.points.len()).collect();
    let p: Vec<usize> = spaces.iter().map(|s| s.degree()).collect();
    let terms: Vec<&Term<T>> = terms
        .iter()
        .filter(|t| t.coef.iter().any(|&c| c != T::zero()))
        .collect();

    // column window (full indices) of every interior row
    let windows: Vec<Vec<(usize, usize)>> = (0..d)
        .map(|l| {
            (0..dims[l])
                .map(|r| {
                    (
                        (r + 1).saturating_sub(p[l]).max(1),
                        (r + 1 + p[l]).min(full[l] - 2),
                    )
                })
                .collect()
        })
        .collect();
    // factor matrices F[c, k] = w_{i,k} d^b B_{lo + c}(x_k), per direction, row and derivative pair
    let factors: Vec<Vec<[DMatrix<T>; 4]>> = (0..d)
        .map(|l| {
            let rule = &rules[l];
            (0..dims[l])
                .map(|r| {
                    let range = rule.rows[r].clone();
                    let (lo, hi) = windows[l][r];
                    std::array::from_fn(|pair| {
                        let b = pair % 2;
                        let w = &rule.weights[pair][r];
                        DMatrix::from_fn(hi + 1 - lo, range.len(), |c, k| {
                            w[k] * rule.basis[range.start + k].get(b, lo + c)
                        })
                    })
                })
                .collect()
        })
        .collect();

    let n: usize = dims.iter().product();
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    let mut work = 0u64;
    let mut cbox = Vec::new();
    let mut cur = Vec::new();
    let mut next = Vec::new();
    let mut acc: Vec<T> = Vec::new();
    for_each_multi_index(&dims, |mi| {
        let ranges: Vec<std::ops::Range<usize>> =
            (0..d).map(|l| rules[l].rows[mi[l]].clone()).collect();
        let wins: Vec<(usize, usize)> = (0..d).map(|l| windows[l][mi[l]]).collect();
        let out_dims: Vec<usize> = wins.iter().map(|&(lo, hi)| hi + 1 - lo).collect();
        acc.clear();
        acc.resize(out_dims.iter().product(), T::zero());
        let box_dims: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
        for term in &terms {
            cbox.clear();
            for_each_multi_index(&box_dims, |q| {
                let mut idx = 0;
                let mut stride = 1;
                for l in 0..d {
                    idx += stride * (ranges[l].start + q[l]);
                    stride *= npts[l];
                }
                cbox.push(term.coef[idx]);
            });
            let mut shape = box_dims.clone();
            cur.clone_from(&cbox);
            for l in 0..d {
                let f = &factors[l][mi[l]][wq_pair(term.test[l], term.trial[l])];
                work += (cur.len() * f.nrows()) as u64;
                mode_product(&cur, &shape, l, f, &mut next);
                shape[l] = f.nrows();
                std::mem::swap(&mut cur, &mut next);
            }
            for (a, &v) in acc.iter_mut().zip(&cur) {
                *a += v;
            }
        }
        let mut k = 0;
        for_each_multi_index(&out_dims, |local| {
            let v = acc[k];
            k += 1;
            if v == T::zero() {
                return;
            }
            let mut col = 0;
            let mut stride = 1;
            for l in 0..d {
                col += stride * (wins[l].0 + local[l] - 1);
                stride *= dims[l];
            }
            indices.push(col);
            data.push(v);
        });
        indptr.push(indices.len());
    });
    (
        CsrMatrix::from_raw(n, n, indptr, indices, data).expect("rows are sorted"),
        work,
    )
}

/// Stiffness terms `sum_{alpha,beta} Q_{alpha beta}` on the rule grid, plus an
/// optional mass term weighted by `det J`.
fn pullback_terms<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    rules: &[WqRule<T>],
    with_mass: bool,
) -> Result<Vec<Term<T>>> {
    let d = g.dim();
    let grid: Vec<Vec<T>> = rules.iter().map(|r| r.points.clone()).collect();
    let maps = eval_map_on_grid(g, &grid, false)?;
    let mut q = vec![Vec::with_capacity(maps.len()); d * d];
    let mut det = Vec::new();
    for ev in &maps {
        let qm = q_from_eval(ev, k)?;
        for a in 0..d {
            for b in 0..d {
                q[a * d + b].push(qm[(a, b)]);
            }
        }
        if with_mass {
            det.push(ev.det());
        }
    }
    let mut terms = Vec::new();
    for (idx, coef) in q.into_iter().enumerate() {
        let (a, b) = (idx / d, idx % d);
        terms.push(Term {
            test: (0..d).map(|l| usize::from(l == a)).collect(),
            trial: (0..d).map(|l| usize::from(l == b)).collect(),
            coef,
        });
    }
    if with_mass {
        terms.push(Term {
            test: vec![0; d],
            trial: vec![0; d],
            coef: det,
        });
    }
    Ok(terms)
}

/// Weighted-quadrature matrix, always in sparse form; also returns the
/// contraction work (multiply-adds).
pub fn assemble_wq_matrix<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
    rules: &[WqRule<T>],
) -> Result<(CsrMatrix<T>, u64)> {
    check_spaces(g, spaces)?;
    if rules.len() != spaces.len() {
        return Err(Error::DimensionMismatch {
            expected: spaces.len(),
            got: rules.len(),
        });
    }
    let terms = pullback_terms(g, k, rules, false)?;
    Ok(assemble_with_row_rules(spaces, rules, &terms))
}

pub fn build_wq_rules<T: Real>(spaces: &[SplineSpace<T>]) -> Result<Vec<WqRule<T>>> {
    spaces.iter().map(build_wq_rule).collect()
}

fn gauss_row_rules<T: Real>(spaces: &[SplineSpace<T>], extra: usize) -> Result<Vec<WqRule<T>>> {
    spaces
        .iter()
        .map(|s| gauss_row_rule(s, s.degree() + 1 + extra))
        .collect()
}

/// Galerkin matrix of the pulled-back bilinear form with Gauss quadrature of
/// `p + 1 + extra_points` points per element and direction.
pub fn assemble_galerkin_matrix<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
    extra_points: usize,
) -> Result<CsrMatrix<T>> {
    check_spaces(g, spaces)?;
    let rules = gauss_row_rules(spaces, extra_points)?;
    let terms = pullback_terms(g, k, &rules, false)?;
    Ok(assemble_with_row_rules(spaces, &rules, &terms).0)
}

/// Gram matrix of the H1 norm on the physical domain: `int grad u . grad v + u v`.
pub fn assemble_h1_matrix<T: Real>(
    g: &GeometryMap<T>,
    spaces: &[SplineSpace<T>],
    extra_points: usize,
) -> Result<CsrMatrix<T>> {
    check_spaces(g, spaces)?;
    let rules = gauss_row_rules(spaces, extra_points)?;
    let terms = pullback_terms(g, &DiffusionCoefficient::identity(g.dim()), &rules, true)?;
    Ok(assemble_with_row_rules(spaces, &rules, &terms).0)
}

/// Gram matrix of the L2 norm on the physical domain.
pub fn assemble_mass_matrix<T: Real>(
    g: &GeometryMap<T>,
    spaces: &[SplineSpace<T>],
    extra_points: usize,
) -> Result<CsrMatrix<T>> {
    check_spaces(g, spaces)?;
    let rules = gauss_row_rules(spaces, extra_points)?;
    let grid: Vec<Vec<T>> = rules.iter().map(|r| r.points.clone()).collect();
    let det = eval_map_on_grid(g, &grid, false)?
        .iter()
        .map(|e| e.det())
        .collect();
    let d = g.dim();
    Ok(assemble_with_row_rules(
        spaces,
        &rules,
        &[Term {
            test: vec![0; d],
            trial: vec![0; d],
            coef: det,
        }],
    )
    .0)
}

/// Load vector: samples at mapped Greville points for collocation, Gauss
/// quadrature of `int f(F) B_i |det J|` otherwise.
pub fn assemble_rhs<T: Real>(
    g: &GeometryMap<T>,
    f: &dyn Fn(&[T]) -> T,
    spaces: &[SplineSpace<T>],
    method: Method,
) -> Result<Vec<T>> {
    check_spaces(g, spaces)?;
    match method {
        Method::Collocation => {
            let tau: Vec<Vec<T>> = spaces.iter().map(|s| s.greville_points()).collect();
            Ok(eval_map_on_grid(g, &tau, false)?
                .iter()
                .map(|ev| f(&ev.x))
                .collect())
        }
        Method::Wq | Method::Galerkin => {
            let rules: Vec<GaussRule<T>> = spaces
                .iter()
                .map(|s| gauss_rule(s, s.degree() + 2))
                .collect::<Result<_>>()?;
            let grid: Vec<Vec<T>> = rules.iter().map(|r| r.points.clone()).collect();
            let maps = eval_map_on_grid(g, &grid, false)?;
            let mut vals = Vec::with_capacity(maps.len());
            let mut k = 0;
            let gdims: Vec<usize> = grid.iter().map(|p| p.len()).collect();
            for_each_multi_index(&gdims, |q| {
                let ev = &maps[k];
                k += 1;
                let w = (0..q.len()).fold(T::one(), |s, l| s * rules[l].weights[q[l]]);
                vals.push(f(&ev.x) * ev.det().abs() * w);
            });
            // B_l[i, q] = B_{i+1}(x_q)
            let tests: Vec<DMatrix<T>> = spaces
                .iter()
                .zip(&grid)
                .map(|(s, pts)| {
                    let mut b = DMatrix::zeros(s.dim_interior(), pts.len());
                    for (q, &x) in pts.iter().enumerate() {
                        let ev = s.eval_ders_unchecked(x, 0);
                        for (r, &v) in ev.values[0].iter().enumerate() {
                            let j = ev.first + r;
                            if j >= 1 && j - 1 < s.dim_interior() {
                                b[(j - 1, q)] = v;
                            }
                        }
                    }
                    b
                })
                .collect();
            let refs: Vec<&DMatrix<T>> = tests.iter().collect();
            Ok(kron_apply(&refs, &gdims, &vals))
        }
    }
}

/// Collocation system; identity geometry with `K = I` yields the Kronecker form.
pub fn assemble_collocation<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
    f: &dyn Fn(&[T]) -> T,
) -> Result<AssembledSystem<T>> {
    let operator = if g.is_identity() && k.is_identity() {
        SystemOperator::Kronecker(kronecker_form(&collocation_factors(spaces))?)
    } else {
        SystemOperator::Sparse(assemble_collocation_matrix(g, k, spaces)?)
    };
    Ok(AssembledSystem {
        operator,
        rhs: assemble_rhs(g, f, spaces, Method::Collocation)?,
        descriptor: descriptor(Method::Collocation, g, spaces),
    })
}

/// Weighted-quadrature Galerkin system; identity geometry with `K = I` yields the Kronecker form.
pub fn assemble_wq<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
    rules: &[WqRule<T>],
    f: &dyn Fn(&[T]) -> T,
) -> Result<AssembledSystem<T>> {
    let operator = if g.is_identity() && k.is_identity() {
        SystemOperator::Kronecker(kronecker_form(&galerkin_factors(spaces)?)?)
    } else {
        SystemOperator::Sparse(assemble_wq_matrix(g, k, spaces, rules)?.0)
    };
    Ok(AssembledSystem {
        operator,
        rhs: assemble_rhs(g, f, spaces, Method::Wq)?,
        descriptor: descriptor(Method::Wq, g, spaces),
    })
}

/// Exact Galerkin reference system (Gauss rule with `p + 1` points per element).
pub fn assemble_galerkin_exact<T: Real>(
    g: &GeometryMap<T>,
    k: &DiffusionCoefficient<T>,
    spaces: &[SplineSpace<T>],
    f: &dyn Fn(&[T]) -> T,
) -> Result<AssembledSystem<T>> {
    Ok(AssembledSystem {
        operator: SystemOperator::Sparse(assemble_galerkin_matrix(g, k, spaces, 0)?),
        rhs: assemble_rhs(g, f, spaces, Method::Galerkin)?,
        descriptor: descriptor(Method::Galerkin, g, spaces),
    })
}

/// `u = prod sin(pi x_k)`.
pub fn manufactured_solution<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::one(), |s, &v| s * (T::pi() * v).sin())
}

/// `f = -Δu = d pi^2 prod sin(pi x_k)` for [`manufactured_solution`].
pub fn manufactured_source<T: Real>(x: &[T]) -> T {
    let pi = T::pi();
    T::from_usize_lossy(x.len()) * pi * pi * manufactured_solution(x)
}
