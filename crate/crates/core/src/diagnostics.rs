//! Spectral and perturbation diagnostics of the preconditioned systems.

use crate::assembly::{assemble_galerkin_matrix, assemble_h1_matrix, assemble_wq_matrix, build_wq_rules};
use crate::error::{Error, Result};
use crate::fastdiag::Preconditioner;
use crate::geometry::{coefficient_matrix_q, DiffusionCoefficient, GeometryMap};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::splines::SplineSpace;
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

/// Largest system handed to a dense eigen or singular value solver.
pub const SPECTRUM_LIMIT: usize = 4096;

/// Extra Gauss points per element for the reference Galerkin and `H1` matrices.
const REFERENCE_EXTRA_POINTS: usize = 2;

fn modulus<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

#[derive(Debug, Clone)]
pub struct SpectrumReport<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    pub spectral_radius: T,
    pub max_imag: T,
}

impl<T: Real> SpectrumReport<T> {
    /// Real parts, ascending.
    pub fn real_parts(&self) -> Vec<T> {
        let mut re: Vec<T> = self.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        re
    }

    /// Whether every eigenvalue is real (up to `tol * rho`) and inside
    /// `[lo, hi]` widened by `margin` relative to the interval ends.
    pub fn contained_in(&self, lo: T, hi: T, margin: T, tol_imag: T) -> bool {
        let lo = lo - margin * lo.abs().max(T::one());
        let hi = hi + margin * hi.abs().max(T::one());
        self.eigenvalues
            .iter()
            .all(|z| z.im.abs() <= tol_imag * self.spectral_radius && z.re >= lo && z.re <= hi)
    }
}

/// Dense `P^-1 A`, built column by column with the preconditioner.
pub fn preconditioned_matrix<T: Real>(a: &CsrMatrix<T>, p: &Preconditioner<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if p.size() != n {
        return Err(Error::DimensionMismatch { expected: p.size(), got: n });
    }
    if n > SPECTRUM_LIMIT {
        return Err(Error::TooLarge { size: n, limit: SPECTRUM_LIMIT });
    }
    let dense = a.to_dense();
    let mut out = DMatrix::zeros(n, n);
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        p.apply_into(dense.column(j).as_slice(), &mut col)?;
        out.column_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

/// Eigenvalues of `P^-1 A` in complex arithmetic.
pub fn preconditioned_spectrum<T: Real>(a: &CsrMatrix<T>, p: &Preconditioner<T>) -> Result<SpectrumReport<T>> {
    spectrum(preconditioned_matrix(a, p)?)
}

/// Eigenvalues of a dense matrix in complex arithmetic.
pub fn spectrum<T: Real>(m: DMatrix<T>) -> Result<SpectrumReport<T>> {
    if m.nrows() > SPECTRUM_LIMIT {
        return Err(Error::TooLarge { size: m.nrows(), limit: SPECTRUM_LIMIT });
    }
    let schur = nalgebra::Schur::try_new(m, T::eps(), 100_000)
        .ok_or_else(|| Error::NoConvergence("real Schur decomposition".into()))?;
    let eigenvalues: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();
    let spectral_radius = eigenvalues.iter().fold(T::zero(), |m, z| m.max(modulus(*z)));
    let max_imag = eigenvalues.iter().fold(T::zero(), |m, z| m.max(z.im.abs()));
    Ok(SpectrumReport { eigenvalues, spectral_radius, max_imag })
}

/// `(inf lambda_min(Q), sup lambda_max(Q))` sampled on a uniform grid with
/// `samples` points per direction, boundary included.
pub fn q_eigenvalue_bounds<T: Real>(g: &GeometryMap<T>, k: &DiffusionCoefficient<T>, samples: usize) -> Result<(T, T)> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples per direction".into()));
    }
    let d = g.dim();
    let total = samples.pow(d as u32);
    let step = T::one() / T::from_usize_lossy(samples - 1);
    let (mut lo, mut hi) = (T::max_value().unwrap(), T::min_value().unwrap());
    let mut xi = vec![T::zero(); d];
    for idx in 0..total {
        let mut rest = idx;
        for v in xi.iter_mut() {
            *v = T::from_usize_lossy(rest % samples) * step;
            rest /= samples;
        }
        let q = coefficient_matrix_q(g, k, &xi)?;
        let eig = q.symmetric_eigenvalues();
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    /// `max_{l* in L*} min_{l in L} |l - l*| / |l|`
    Relative,
    /// `max_{l* in L*} min_{l in L} |l - l*|`
    Absolute,
}

/// Distance from every eigenvalue of `lam_star` to its nearest neighbour in `lam`.
pub fn eigenvalue_matching_distance<T: Real>(lam: &[Complex<T>], lam_star: &[Complex<T>], mode: MatchingMode) -> Result<T> {
    if lam.is_empty() || lam_star.is_empty() {
        return Err(Error::InvalidArgument("spectra must be nonempty".into()));
    }
    if mode == MatchingMode::Relative && lam.iter().any(|z| modulus(*z) == T::zero()) {
        return Err(Error::Singular("zero eigenvalue in relative matching distance".into()));
    }
    let mut worst = T::zero();
    for ls in lam_star {
        let best = lam.iter().fold(T::max_value().unwrap(), |m, l| {
            let dist = modulus(*l - *ls);
            m.min(match mode {
                MatchingMode::Absolute => dist,
                MatchingMode::Relative => dist / modulus(*l),
            })
        });
        worst = worst.max(best);
    }
    Ok(worst)
}

/// `|| H^-1/2 (A_G - A_wq) H^-1/2 ||_2` for SPD `H`.
pub fn compute_e_h<T: Real>(a_g: &DMatrix<T>, a_wq: &DMatrix<T>, h: &DMatrix<T>) -> Result<T> {
    let n = h.nrows();
    for m in [a_g, a_wq, h] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.nrows().max(m.ncols()) });
        }
    }
    if n > SPECTRUM_LIMIT {
        return Err(Error::TooLarge { size: n, limit: SPECTRUM_LIMIT });
    }
    if (h - h.transpose()).amax() > T::lit(1e3) * T::eps() * h.amax() {
        return Err(Error::NotSpd("H is not symmetric".into()));
    }
    let sym = (h + h.transpose()) * T::lit(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, T::eps(), 100_000)
        .ok_or_else(|| Error::NoConvergence("symmetric eigensolver".into()))?;
    if !(eig.eigenvalues.min() > T::zero()) {
        return Err(Error::NotSpd(format!("smallest eigenvalue {:e}", eig.eigenvalues.min())));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &lam) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col /= lam.sqrt();
    }
    let inv_sqrt = &scaled * eig.eigenvectors.transpose();
    let e = a_g - a_wq;
    let c = &inv_sqrt * e * &inv_sqrt;
    Ok(c.singular_values().max())
}

/// `e_h` of the weighted-quadrature matrix against a Gauss reference on `spaces`.
pub fn e_h_for<T: Real>(g: &GeometryMap<T>, k: &DiffusionCoefficient<T>, spaces: &[SplineSpace<T>]) -> Result<T> {
    let a_g = assemble_galerkin_matrix(g, k, spaces, REFERENCE_EXTRA_POINTS)?;
    let (a_wq, _) = assemble_wq_matrix(g, k, spaces, &build_wq_rules(spaces)?)?;
    let h = assemble_h1_matrix(g, spaces, REFERENCE_EXTRA_POINTS)?;
    compute_e_h(&a_g.to_dense(), &a_wq.to_dense(), &h.to_dense())
}
