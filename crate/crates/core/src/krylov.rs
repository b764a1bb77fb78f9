//! Right-preconditioned BiCGStab and the ILU(0) baseline preconditioner.

use crate::assembly::SystemOperator;
use crate::error::{Error, Result};
use crate::fastdiag::Preconditioner;
use crate::scalar::{dot, norm2, Real};
use crate::sparse::CsrMatrix;
use crate::tensor::KroneckerSumOperator;
use nalgebra::DMatrix;
use serde::Serialize;
use std::time::Instant;

/// Square linear map applied into a caller-owned buffer.
pub trait LinearOperator<T: Real> {
    fn size(&self) -> usize;

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()>;

    fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), got: x.len() });
        }
        let mut y = vec![T::zero(); x.len()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}

/// The identity map, i.e. no preconditioning.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl<T: Real> LinearOperator<T> for Identity {
    fn size(&self) -> usize {
        self.0
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        y.copy_from_slice(x);
        Ok(())
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    pub size: usize,
    pub f: F,
}

impl<T: Real, F: Fn(&[T], &mut [T]) -> Result<()>> LinearOperator<T> for FnOperator<F> {
    fn size(&self) -> usize {
        self.size
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        (self.f)(x, y)
    }
}

impl<T: Real> LinearOperator<T> for CsrMatrix<T> {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        self.matvec_into(x, y);
        Ok(())
    }
}

impl<T: Real> LinearOperator<T> for DMatrix<T> {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b);
        }
        Ok(())
    }
}

impl<T: Real> LinearOperator<T> for KroneckerSumOperator<T> {
    fn size(&self) -> usize {
        KroneckerSumOperator::size(self)
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.size() || y.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), got: x.len() });
        }
        KroneckerSumOperator::apply_into(self, x, y);
        Ok(())
    }
}

impl<T: Real> LinearOperator<T> for SystemOperator<T> {
    fn size(&self) -> usize {
        SystemOperator::size(self)
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        match self {
            SystemOperator::Sparse(a) => LinearOperator::apply_into(a, x, y),
            SystemOperator::Kronecker(k) => LinearOperator::apply_into(k, x, y),
        }
    }
}

impl<T: Real> LinearOperator<T> for Preconditioner<T> {
    fn size(&self) -> usize {
        Preconditioner::size(self)
    }

    fn apply_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        Preconditioner::apply_into(self, x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// `rho`, `<r_hat, v>` or `omega` vanished.
    Breakdown(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Whole or half iterations (`k - 0.5` when the BiCG half step converged).
    pub iterations: f64,
    pub converged: bool,
    pub termination: Termination,
    /// Relative residual after every half step, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// Relative true residual `||b - A x|| / ||b||` of the returned iterate.
    pub final_residual: f64,
    /// Preconditioner setup time in seconds, filled in by the caller.
    pub setup_time: f64,
    pub apply_time: f64,
    pub matvec_time: f64,
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BicgstabOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BicgstabOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000 }
    }
}

struct Timed<'a, T: Real, O: LinearOperator<T> + ?Sized> {
    op: &'a O,
    secs: f64,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Real, O: LinearOperator<T> + ?Sized> Timed<'a, T, O> {
    fn new(op: &'a O) -> Self {
        Self { op, secs: 0.0, _t: std::marker::PhantomData }
    }

    fn run(&mut self, x: &[T], y: &mut [T]) -> Result<()> {
        let t = Instant::now();
        let r = self.op.apply_into(x, y);
        self.secs += t.elapsed().as_secs_f64();
        r
    }
}

fn axpy_into<T: Real>(out: &mut [T], x: &[T], a: T, y: &[T]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Solves `A x = b` with BiCGStab, right-preconditioned by `p_inv`.
///
/// Convergence means `||b - A x|| / ||b|| <= tol`; each candidate is confirmed
/// against the true residual before it is accepted.
pub fn bicgstab<T, A, P>(
    a: &A,
    p_inv: &P,
    b: &[T],
    x0: Option<&[T]>,
    opts: &BicgstabOptions,
) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    P: LinearOperator<T> + ?Sized,
{
    let n = a.size();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if p_inv.size() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p_inv.size() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let mut amul = Timed::new(a);
    let mut pmul = Timed::new(p_inv);
    let mut x = match x0 {
        Some(x0) if x0.len() != n => return Err(Error::DimensionMismatch { expected: n, got: x0.len() }),
        Some(x0) => x0.to_vec(),
        None => vec![T::zero(); n],
    };
    let bnorm = norm2(b).as_f64();
    let mut report = SolveReport {
        iterations: 0.0,
        converged: false,
        termination: Termination::MaxIterations,
        residual_history: Vec::new(),
        final_residual: 0.0,
        setup_time: 0.0,
        apply_time: 0.0,
        matvec_time: 0.0,
        solve_time: 0.0,
    };
    let finish = |mut report: SolveReport, amul: &Timed<T, A>, pmul: &Timed<T, P>| {
        report.matvec_time = amul.secs;
        report.apply_time = pmul.secs;
        report.solve_time = start.elapsed().as_secs_f64();
        report
    };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        report.converged = true;
        report.termination = Termination::Converged;
        report.residual_history.push(0.0);
        return Ok((x, finish(report, &amul, &pmul)));
    }
    let rel = |v: &[T]| norm2(v).as_f64() / bnorm;

    let mut r = vec![T::zero(); n];
    amul.run(&x, &mut r)?;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = rel(&r);
    report.residual_history.push(res);
    report.final_residual = res;
    if res <= opts.tol {
        report.converged = true;
        report.termination = Termination::Converged;
        return Ok((x, finish(report, &amul, &pmul)));
    }

    let r_hat = r.clone();
    let r_hat_norm = norm2(&r_hat);
    let tiny = T::eps() * T::eps();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut h = vec![T::zero(); n];
    let mut check = vec![T::zero(); n];

    // true relative residual of a candidate iterate
    let mut true_residual = |cand: &[T], amul: &mut Timed<T, A>| -> Result<f64> {
        amul.run(cand, &mut check)?;
        for (c, &bi) in check.iter_mut().zip(b) {
            *c = bi - *c;
        }
        Ok(norm2(&check).as_f64() / bnorm)
    };

    for i in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= tiny * r_hat_norm * norm2(&r) {
            report.termination = Termination::Breakdown("rho vanished".into());
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for ((pi, &ri), &vi) in p.iter_mut().zip(&r).zip(&v) {
            *pi = ri + beta * (*pi - omega * vi);
        }
        pmul.run(&p, &mut y)?;
        amul.run(&y, &mut v)?;
        let rv = dot(&r_hat, &v);
        if rv.abs() <= tiny * r_hat_norm * norm2(&v) || rv == T::zero() {
            report.termination = Termination::Breakdown("<r_hat, A P^-1 p> vanished".into());
            break;
        }
        alpha = rho / rv;
        axpy_into(&mut h, &x, alpha, &y);
        axpy_into(&mut s, &r, -alpha, &v);
        res = rel(&s);
        report.residual_history.push(res);
        if res <= opts.tol {
            let tr = true_residual(&h, &mut amul)?;
            if tr <= opts.tol {
                x.copy_from_slice(&h);
                report.iterations = i as f64 - 0.5;
                report.converged = true;
                report.final_residual = tr;
                report.termination = Termination::Converged;
                return Ok((x, finish(report, &amul, &pmul)));
            }
        }
        pmul.run(&s, &mut z)?;
        amul.run(&z, &mut t)?;
        let tt = dot(&t, &t);
        if tt == T::zero() {
            x.copy_from_slice(&h);
            r.copy_from_slice(&s);
            report.iterations = i as f64 - 0.5;
            report.termination = Termination::Breakdown("A P^-1 s vanished".into());
            break;
        }
        omega = dot(&t, &s) / tt;
        axpy_into(&mut x, &h, omega, &z);
        axpy_into(&mut r, &s, -omega, &t);
        res = rel(&r);
        report.residual_history.push(res);
        report.iterations = i as f64;
        if res <= opts.tol {
            let tr = true_residual(&x, &mut amul)?;
            if tr <= opts.tol {
                report.converged = true;
                report.final_residual = tr;
                report.termination = Termination::Converged;
                return Ok((x, finish(report, &amul, &pmul)));
            }
        }
        if omega.abs() <= tiny {
            report.termination = Termination::Breakdown("omega vanished".into());
            break;
        }
    }
    report.final_residual = true_residual(&x, &mut amul)?;
    Ok((x, finish(report, &amul, &pmul)))
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern of `a`.
/// Entry `k` of the result is the original index placed at position `k`.
pub fn rcm_permutation<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.nrows();
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).0.to_vec()).collect();
    for i in 0..n {
        for &j in a.row(i).0 {
            if j != i {
                rows[j].push(i);
            }
        }
    }
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
        indices.extend_from_slice(row);
        indptr.push(indices.len());
    }
    let data = vec![1u8; indices.len()];
    let pattern = sprs::CsMat::new((n, n), indptr, indices, data);
    sprs::linalg::reverse_cuthill_mckee(pattern.view()).perm.vec()
}

/// Zero fill-in incomplete LU of the RCM-permuted matrix.
#[derive(Debug, Clone)]
pub struct Ilu0<T> {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Unit-lower `L` and upper `U` stored together on the permuted pattern.
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    /// RCM reordering followed by ILU(0).
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let perm = rcm_permutation(a);
        Self::with_permutation(a, perm)
    }

    pub fn with_permutation(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            inv[old] = new;
        }
        let mut indptr = vec![0];
        let mut indices = Vec::with_capacity(a.nnz());
        let mut data = Vec::with_capacity(a.nnz());
        for &old in &perm {
            let (cols, vals) = a.row(old);
            let mut entries: Vec<(usize, T)> = cols.iter().map(|&c| inv[c]).zip(vals.iter().copied()).collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (c, v) in entries {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        let mut lu = CsrMatrix::from_raw(n, n, indptr, indices, data)?;
        let diag = factorize_ilu0(&mut lu)?;
        Ok(Self { perm, lu, diag })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Combined factors on the permuted pattern (strict lower part is `L`).
    pub fn factors(&self) -> &CsrMatrix<T> {
        &self.lu
    }
}

fn factorize_ilu0<T: Real>(lu: &mut CsrMatrix<T>) -> Result<Vec<usize>> {
    let n = lu.nrows();
    let indptr = lu.indptr().to_vec();
    let indices = lu.indices().to_vec();
    let mut diag = vec![usize::MAX; n];
    for i in 0..n {
        for pos in indptr[i]..indptr[i + 1] {
            if indices[pos] == i {
                diag[i] = pos;
            }
        }
        if diag[i] == usize::MAX {
            return Err(Error::ZeroPivot(i));
        }
    }
    let scale = lu.data().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = T::eps() * scale;
    let mut marker = vec![usize::MAX; n];
    let data = lu.data_mut();
    for i in 0..n {
        for pos in indptr[i]..indptr[i + 1] {
            marker[indices[pos]] = pos;
        }
        for kpos in indptr[i]..diag[i] {
            let k = indices[kpos];
            let pivot = data[diag[k]];
            if pivot.abs() <= tiny {
                return Err(Error::ZeroPivot(k));
            }
            let lik = data[kpos] / pivot;
            data[kpos] = lik;
            for jpos in diag[k] + 1..indptr[k + 1] {
                let m = marker[indices[jpos]];
                if m != usize::MAX {
                    data[m] -= lik * data[jpos];
                }
            }
        }
        if data[diag[i]].abs() <= tiny {
            return Err(Error::ZeroPivot(i));
        }
        for pos in indptr[i]..indptr[i + 1] {
            marker[indices[pos]] = usize::MAX;
        }
    }
    Ok(diag)
}

impl<T: Real> LinearOperator<T> for Ilu0<T> {
    fn size(&self) -> usize {
        self.perm.len()
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let n = self.perm.len();
        let (indptr, indices, data) = (self.lu.indptr(), self.lu.indices(), self.lu.data());
        let mut y: Vec<T> = self.perm.iter().map(|&old| x[old]).collect();
        for i in 0..n {
            let mut s = y[i];
            for pos in indptr[i]..self.diag[i] {
                s -= data[pos] * y[indices[pos]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for pos in self.diag[i] + 1..indptr[i + 1] {
                s -= data[pos] * y[indices[pos]];
            }
            y[i] = s / data[self.diag[i]];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
        Ok(())
    }
}
