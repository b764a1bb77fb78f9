//! Exact solvers for the parametric-domain operator
//! `P = sum_l M_d ⊗ .. ⊗ K_l ⊗ .. ⊗ M_1` built from per-direction pencils
//! `(K_l, M_l)`: fast diagonalization (FD) and Bartels-Stewart (BS).

use crate::assembly::UnivariateMatrices;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{rotating_mode_product, KroneckerSumOperator};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

/// Iteration cap for the dense Schur and symmetric eigen solvers.
const MAX_EIG_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Fd,
    Bs,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Fd => "fd",
            Backend::Bs => "bs",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fd" => Ok(Backend::Fd),
            "bs" => Ok(Backend::Bs),
            _ => Err(Error::InvalidArgument(format!("unknown backend {s:?}"))),
        }
    }
}

/// Guards of the FD construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    /// Largest tolerated `|Im λ|`, relative to the spectral radius.
    pub tol_imag: f64,
    /// Largest tolerated 2-norm condition number of the eigenvector matrix.
    pub cond_max: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self { tol_imag: 1e-8, cond_max: 1e8 }
    }
}

/// `M^-1 K U = U D` with `V = (M U)^-T`.
#[derive(Debug, Clone)]
pub struct FdDirection<T: Real> {
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    pub eigenvalues: Vec<T>,
    pub cond: f64,
    /// True when the pencil was symmetric and `U` is `M`-orthonormal (`V = U`).
    pub symmetric: bool,
}

/// Real Schur form `M^-1 K = Q R Q^T` with `G = M^-T Q`.
#[derive(Debug, Clone)]
pub struct BsDirection<T: Real> {
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub g: DMatrix<T>,
    /// Diagonal blocks of `R` (sizes 1 or 2).
    pub blocks: Vec<Range<usize>>,
}

#[derive(Debug, Clone)]
pub enum PencilFactorization<T: Real> {
    Fd(Vec<FdDirection<T>>),
    Bs(Vec<BsDirection<T>>),
}

/// Exact inverse of the Kronecker-sum operator `P`.
#[derive(Debug, Clone)]
pub struct Preconditioner<T: Real> {
    backend: Backend,
    dims: Vec<usize>,
    factorization: PencilFactorization<T>,
    /// FD only: reciprocal of the Kronecker sum of eigenvalues.
    inv_diag: Vec<T>,
    operator: KroneckerSumOperator<T>,
}

fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    let scale = m.amax();
    (m - m.transpose()).amax() <= T::eps() * T::lit(16.0) * scale
}

fn solve_mass<T: Real>(m: &DMatrix<T>, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular("mass matrix M_l".into()))
}

/// Real Schur form with every 2x2 block that has real eigenvalues split.
fn real_schur<T: Real>(a: DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>, Vec<Range<usize>>)> {
    let n = a.nrows();
    let scale = a.amax().max(T::eps());
    let schur = nalgebra::Schur::try_new(a, T::eps(), MAX_EIG_ITER)
        .ok_or_else(|| Error::NoConvergence("real Schur decomposition".into()))?;
    let (mut q, mut r) = schur.unpack();
    let tiny = T::eps() * scale;
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && r[(i + 1, i)].abs() > tiny {
            let (a, b, c, d) = (r[(i, i)], r[(i, i + 1)], r[(i + 1, i)], r[(i + 1, i + 1)]);
            let half = (a - d) * T::lit(0.5);
            let disc = half * half + b * c;
            if disc >= T::zero() {
                // eigenvector (l - d, c) of the block, rotated onto e_1
                let l = (a + d) * T::lit(0.5) + if half >= T::zero() { disc.sqrt() } else { -disc.sqrt() };
                let (x, y) = (l - d, c);
                let nrm = x.hypot(y);
                let (cs, sn) = (x / nrm, y / nrm);
                for j in 0..n {
                    let (u, v) = (r[(i, j)], r[(i + 1, j)]);
                    r[(i, j)] = cs * u + sn * v;
                    r[(i + 1, j)] = -sn * u + cs * v;
                }
                for j in 0..n {
                    let (u, v) = (r[(j, i)], r[(j, i + 1)]);
                    r[(j, i)] = cs * u + sn * v;
                    r[(j, i + 1)] = -sn * u + cs * v;
                    let (u, v) = (q[(j, i)], q[(j, i + 1)]);
                    q[(j, i)] = cs * u + sn * v;
                    q[(j, i + 1)] = -sn * u + cs * v;
                }
                r[(i + 1, i)] = T::zero();
                blocks.push(i..i + 1);
                i += 1;
            } else {
                blocks.push(i..i + 2);
                i += 2;
            }
        } else {
            if i + 1 < n {
                r[(i + 1, i)] = T::zero();
            }
            blocks.push(i..i + 1);
            i += 1;
        }
    }
    // clear rounding below the quasi-triangular structure
    for j in 0..n {
        for k in j + 2..n {
            r[(k, j)] = T::zero();
        }
    }
    Ok((q, r, blocks))
}

fn condition_number<T: Real>(u: &DMatrix<T>) -> f64 {
    let s = u.clone().singular_values();
    let (max, min) = (s.max(), s.min());
    if min > T::zero() {
        (max / min).as_f64()
    } else {
        f64::INFINITY
    }
}

fn sort_ascending<T: Real>(vals: &[T], vecs: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted = order.iter().map(|&k| vals[k]).collect();
    let cols: Vec<_> = order.iter().map(|&k| vecs.column(k).into_owned()).collect();
    (sorted, DMatrix::from_columns(&cols))
}

/// FD factorization of one pencil `(K, M)`.
pub fn factorize_fd<T: Real>(mass: &DMatrix<T>, stiff: &DMatrix<T>, direction: usize, opts: &FdOptions) -> Result<FdDirection<T>> {
    let n = mass.nrows();
    if is_symmetric(mass) && is_symmetric(stiff) {
        if let Some(chol) = mass.clone().cholesky() {
            let l = chol.l();
            let x = l
                .solve_lower_triangular(stiff)
                .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
            let c = l
                .solve_lower_triangular(&x.transpose())
                .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
            let c = (&c + c.transpose()) * T::lit(0.5);
            let eig = nalgebra::SymmetricEigen::try_new(c, T::eps(), MAX_EIG_ITER)
                .ok_or_else(|| Error::NoConvergence("symmetric eigensolver".into()))?;
            let u = l
                .transpose()
                .solve_upper_triangular(&eig.eigenvectors)
                .ok_or_else(|| Error::Singular("Cholesky factor".into()))?;
            let vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
            let (eigenvalues, u) = sort_ascending(&vals, &u);
            let cond = condition_number(&u);
            if !(cond <= opts.cond_max) {
                return Err(Error::IllConditionedEigenvectors { direction, cond });
            }
            return Ok(FdDirection { v: u.clone(), u, eigenvalues, cond, symmetric: true });
        }
    }

    let a = solve_mass(mass, stiff)?;
    let (q, r, blocks) = real_schur(a)?;
    let rho = (0..n).fold(T::zero(), |m, i| m.max(r[(i, i)].abs()));
    let mut max_imag = T::zero();
    for b in &blocks {
        if b.len() == 2 {
            let i = b.start;
            let (a, bb, c, d) = (r[(i, i)], r[(i, i + 1)], r[(i + 1, i)], r[(i + 1, i + 1)]);
            let half = (a - d) * T::lit(0.5);
            let im = (-(half * half + bb * c)).max(T::zero()).sqrt();
            max_imag = max_imag.max(im);
        }
    }
    let max_imag = max_imag.as_f64();
    if max_imag > opts.tol_imag * rho.as_f64().max(f64::MIN_POSITIVE) {
        return Err(Error::ComplexEigenvalues { direction, max_imag });
    }
    // eigenvectors of the (now triangular) R by back substitution
    let mut diag: Vec<T> = (0..n).map(|i| r[(i, i)]).collect();
    for b in blocks.iter().filter(|b| b.len() == 2) {
        let i = b.start;
        let mean = (r[(i, i)] + r[(i + 1, i + 1)]) * T::lit(0.5);
        diag[i] = mean;
        diag[i + 1] = mean;
    }
    if blocks.iter().any(|b| b.len() == 2) {
        // nearly defective pair: report it through the conditioning guard
        return Err(Error::IllConditionedEigenvectors { direction, cond: f64::INFINITY });
    }
    let small = T::eps() * rho.max(T::eps());
    let mut y = DMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = T::one();
        for j in (0..k).rev() {
            let mut s = T::zero();
            for i in j + 1..=k {
                s += r[(j, i)] * y[(i, k)];
            }
            let mut den = r[(j, j)] - diag[k];
            if den.abs() < small {
                den = if den >= T::zero() { small } else { -small };
            }
            y[(j, k)] = -s / den;
        }
    }
    let mut u = q * y;
    for mut col in u.column_iter_mut() {
        let nrm = col.norm();
        col /= nrm;
    }
    let (eigenvalues, u) = sort_ascending(&diag, &u);
    let cond = condition_number(&u);
    if !(cond <= opts.cond_max) {
        return Err(Error::IllConditionedEigenvectors { direction, cond });
    }
    let mu = mass * &u;
    let v = mu
        .try_inverse()
        .ok_or_else(|| Error::Singular("M U".into()))?
        .transpose();
    Ok(FdDirection { u, v, eigenvalues, cond, symmetric: false })
}

/// BS factorization of one pencil `(K, M)`.
pub fn factorize_bs<T: Real>(mass: &DMatrix<T>, stiff: &DMatrix<T>) -> Result<BsDirection<T>> {
    let a = solve_mass(mass, stiff)?;
    let (q, r, blocks) = real_schur(a)?;
    let g = solve_mass(&mass.transpose(), &q)?;
    Ok(BsDirection { q, r, g, blocks })
}

/// Builds the exact inverse of `sum_l M_d ⊗ .. ⊗ K_l ⊗ .. ⊗ M_1`.
pub fn build_preconditioner<T: Real>(factors: &[UnivariateMatrices<T>], backend: Backend, opts: &FdOptions) -> Result<Preconditioner<T>> {
    let mass: Vec<DMatrix<T>> = factors.iter().map(|f| f.mass.clone()).collect();
    let stiff: Vec<DMatrix<T>> = factors.iter().map(|f| f.stiffness.clone()).collect();
    let operator = KroneckerSumOperator::laplacian_like(&mass, &stiff)?;
    let dims = operator.dims().to_vec();
    let (factorization, inv_diag) = match backend {
        Backend::Fd => {
            let dirs: Vec<FdDirection<T>> = factors
                .iter()
                .enumerate()
                .map(|(l, f)| factorize_fd(&f.mass, &f.stiffness, l, opts))
                .collect::<Result<_>>()?;
            let n: usize = dims.iter().product();
            let mut diag = vec![T::zero(); n];
            let mut stride = 1;
            for (l, dir) in dirs.iter().enumerate() {
                for (i, v) in diag.iter_mut().enumerate() {
                    *v += dir.eigenvalues[(i / stride) % dims[l]];
                }
                stride *= dims[l];
            }
            let scale = diag.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let mut inv = Vec::with_capacity(n);
            for v in diag {
                if !(v.abs() > T::eps() * scale) {
                    return Err(Error::Singular("Kronecker sum of eigenvalues has a zero entry".into()));
                }
                inv.push(T::one() / v);
            }
            (PencilFactorization::Fd(dirs), inv)
        }
        Backend::Bs => {
            let dirs = factors
                .iter()
                .map(|f| factorize_bs(&f.mass, &f.stiffness))
                .collect::<Result<_>>()?;
            (PencilFactorization::Bs(dirs), Vec::new())
        }
    };
    Ok(Preconditioner { backend, dims, factorization, inv_diag, operator })
}

/// FD with automatic fallback to BS when the FD guards fail.
pub fn build_preconditioner_with_fallback<T: Real>(
    factors: &[UnivariateMatrices<T>],
    opts: &FdOptions,
) -> Result<(Preconditioner<T>, Option<Error>)> {
    match build_preconditioner(factors, Backend::Fd, opts) {
        Ok(p) => Ok((p, None)),
        Err(e @ (Error::ComplexEigenvalues { .. } | Error::IllConditionedEigenvectors { .. })) => {
            Ok((build_preconditioner(factors, Backend::Bs, opts)?, Some(e)))
        }
        Err(e) => Err(e),
    }
}

/// Convection-diffusion variant: stiffness factors `K_l + H_l`.
pub fn build_convection_preconditioner<T: Real>(
    factors: &[UnivariateMatrices<T>],
    advection: &[DMatrix<T>],
    backend: Backend,
    opts: &FdOptions,
) -> Result<Preconditioner<T>> {
    if advection.len() != factors.len() {
        return Err(Error::DimensionMismatch { expected: factors.len(), got: advection.len() });
    }
    let shifted: Vec<UnivariateMatrices<T>> = factors
        .iter()
        .zip(advection)
        .map(|(f, h)| UnivariateMatrices { mass: f.mass.clone(), stiffness: &f.stiffness + h })
        .collect();
    build_preconditioner(&shifted, backend, opts)
}

/// Solves `(R ⊗ I_s + I ⊗ S) y = z` over the leading `k + 1` directions in
/// place. Data layout: shift index fastest, then direction 0, ..., direction k.
fn bs_solve<T: Real>(dirs: &[BsDirection<T>], dims: &[usize], k: usize, s_mat: &DMatrix<T>, data: &mut [T]) -> Result<()> {
    let s = s_mat.nrows();
    let r = &dirs[k].r;
    let inner: usize = s * dims[..k].iter().product::<usize>();
    for block in dirs[k].blocks.iter().rev() {
        // subtract the already solved trailing blocks
        let (head, tail) = data.split_at_mut(block.end * inner);
        for row in block.clone() {
            let target = &mut head[row * inner..(row + 1) * inner];
            for j in block.end..dims[k] {
                let c = r[(row, j)];
                if c == T::zero() {
                    continue;
                }
                let src = &tail[(j - block.end) * inner..(j - block.end + 1) * inner];
                for (t, &v) in target.iter_mut().zip(src) {
                    *t -= c * v;
                }
            }
        }
        let kb = block.len();
        let rkk = r.view((block.start, block.start), (kb, kb)).into_owned();
        let shifted = rkk.kronecker(&DMatrix::identity(s, s)) + DMatrix::identity(kb, kb).kronecker(s_mat);
        let seg = &mut data[block.start * inner..block.end * inner];
        if k == 0 {
            solve_small(&shifted, seg)?;
        } else if kb == 1 {
            bs_solve(dirs, dims, k - 1, &shifted, seg)?;
        } else {
            // interleave the two block rows so that the combined shift index is fastest
            let lower = inner / s;
            let mut buf = vec![T::zero(); seg.len()];
            for (r, part) in seg.chunks(inner).enumerate() {
                for pos in 0..lower {
                    for t in 0..s {
                        buf[pos * kb * s + r * s + t] = part[pos * s + t];
                    }
                }
            }
            bs_solve(dirs, dims, k - 1, &shifted, &mut buf)?;
            for (r, part) in seg.chunks_mut(inner).enumerate() {
                for pos in 0..lower {
                    for t in 0..s {
                        part[pos * s + t] = buf[pos * kb * s + r * s + t];
                    }
                }
            }
        }
    }
    Ok(())
}

fn solve_small<T: Real>(a: &DMatrix<T>, z: &mut [T]) -> Result<()> {
    if a.nrows() == 1 {
        let d = a[(0, 0)];
        if d == T::zero() {
            return Err(Error::Singular("shifted diagonal block".into()));
        }
        z[0] /= d;
        return Ok(());
    }
    let sol = a
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(z))
        .ok_or_else(|| Error::Singular("shifted diagonal block".into()))?;
    z.copy_from_slice(sol.as_slice());
    Ok(())
}

impl<T: Real> Preconditioner<T> {
    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn factorization(&self) -> &PencilFactorization<T> {
        &self.factorization
    }

    /// The operator `P` whose inverse this applies.
    pub fn operator(&self) -> &KroneckerSumOperator<T> {
        &self.operator
    }

    /// `s = P^-1 b`.
    pub fn apply(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), got: b.len() });
        }
        let mut out = vec![T::zero(); b.len()];
        self.apply_into(b, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, b: &[T], out: &mut [T]) -> Result<()> {
        let d = self.dims.len();
        let mut cur = b.to_vec();
        let mut buf = Vec::with_capacity(b.len());
        match &self.factorization {
            PencilFactorization::Fd(dirs) => {
                for dir in dirs {
                    rotating_mode_product(&cur, &dir.v.transpose(), &mut buf);
                    std::mem::swap(&mut cur, &mut buf);
                }
                for (c, &w) in cur.iter_mut().zip(&self.inv_diag) {
                    *c *= w;
                }
                for dir in dirs {
                    rotating_mode_product(&cur, &dir.u, &mut buf);
                    std::mem::swap(&mut cur, &mut buf);
                }
            }
            PencilFactorization::Bs(dirs) => {
                for dir in dirs {
                    rotating_mode_product(&cur, &dir.g.transpose(), &mut buf);
                    std::mem::swap(&mut cur, &mut buf);
                }
                bs_solve(dirs, &self.dims, d - 1, &DMatrix::zeros(1, 1), &mut cur)?;
                for dir in dirs {
                    rotating_mode_product(&cur, &dir.q, &mut buf);
                    std::mem::swap(&mut cur, &mut buf);
                }
            }
        }
        out.copy_from_slice(&cur);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_example() {
        let f = UnivariateMatrices {
            mass: DMatrix::<f64>::identity(2, 2),
            stiffness: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
        };
        for backend in [Backend::Fd, Backend::Bs] {
            let p = build_preconditioner(&[f.clone(), f.clone()], backend, &FdOptions::default()).unwrap();
            let s = p.apply(&[2.0, 3.0, 3.0, 4.0]).unwrap();
            assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-15), "{backend}: {s:?}");
        }
        let dir = factorize_fd(&f.mass, &f.stiffness, 0, &FdOptions::default()).unwrap();
        assert!((dir.u.clone() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert_eq!(dir.eigenvalues, vec![1.0, 2.0]);
    }

    #[test]
    fn rotation_pencil_rejected_by_fd() {
        // M^-1 K = [[0, -1], [1, 0]] has eigenvalues +-i
        let f = UnivariateMatrices {
            mass: DMatrix::<f64>::identity(2, 2),
            stiffness: DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        };
        let err = factorize_fd(&f.mass, &f.stiffness, 1, &FdOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ComplexEigenvalues { direction: 1, .. }));
        let bs = factorize_bs(&f.mass, &f.stiffness).unwrap();
        assert_eq!(bs.blocks, vec![0..2]);
    }

    #[test]
    fn defective_pencil_rejected_by_fd() {
        let f = UnivariateMatrices {
            mass: DMatrix::<f64>::identity(2, 2),
            stiffness: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        };
        let err = factorize_fd(&f.mass, &f.stiffness, 0, &FdOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IllConditionedEigenvectors { .. }));
        let (p, fallback) = build_preconditioner_with_fallback(&[f.clone(), f], &FdOptions::default()).unwrap();
        assert_eq!(p.backend(), Backend::Bs);
        assert!(fallback.is_some());
    }
}
