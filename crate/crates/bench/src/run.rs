//! Runs a benchmark grid cell by cell.

use crate::config::{BenchConfig, MeshSize, Precond, Rhs};
use anyhow::Result;
use iga_core::assembly::{
    assemble_collocation, assemble_galerkin_matrix, assemble_wq, assemble_wq_matrix, build_wq_rules, collocation_factors, galerkin_factors,
    manufactured_source, AssembledSystem, Method, SystemOperator,
};
use iga_core::diagnostics::{
    e_h_for, eigenvalue_matching_distance, preconditioned_spectrum, q_eigenvalue_bounds, MatchingMode, SPECTRUM_LIMIT,
};
use iga_core::fastdiag::{build_preconditioner, Backend, FdOptions};
use iga_core::geometry::{DiffusionCoefficient, GeometryMap};
use iga_core::krylov::{bicgstab, BicgstabOptions, Identity, Ilu0, LinearOperator, SolveReport, Termination};
use iga_core::splines::SplineSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
    /// Rejected by the memory guard.
    Skipped,
    Failed,
}

/// One `(h, p)` cell. Times are wall-clock seconds; `total_time` is setup plus solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub domain: String,
    pub method: String,
    pub precond: String,
    pub p: usize,
    pub h: MeshSize,
    pub dofs: usize,
    pub status: Status,
    pub iterations: Option<f64>,
    pub residual: Option<f64>,
    pub assembly_time: Option<f64>,
    pub setup_time: Option<f64>,
    pub solve_time: Option<f64>,
    pub total_time: Option<f64>,
    pub message: String,
}

impl CellResult {
    /// Finished, or deliberately skipped by the memory guard.
    pub fn completed(&self) -> bool {
        matches!(self.status, Status::Converged | Status::Skipped)
    }
}

/// One diagnostics quantity for a cell; `p` and `h` are absent for per-domain values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub domain: String,
    pub p: Option<usize>,
    pub h: Option<MeshSize>,
    pub quantity: String,
    pub value: f64,
}

pub fn geometry(cfg: &BenchConfig) -> Result<GeometryMap<f64>> {
    Ok(match cfg.domain.as_str() {
        "quarter_ring" => GeometryMap::default_quarter_ring(),
        "revolved_ring" | "revolved_quarter_ring" => GeometryMap::revolved_quarter_ring(),
        _ => GeometryMap::identity(cfg.spatial_dim())?,
    })
}

fn spaces(d: usize, ne: usize, p: usize) -> Result<Vec<SplineSpace<f64>>> {
    Ok((0..d).map(|_| SplineSpace::uniform(ne, p)).collect::<Result<_, _>>()?)
}

/// Predicted peak bytes of a cell: sparse matrix, ILU factors and Krylov vectors.
pub fn predicted_bytes(cfg: &BenchConfig, p: usize, ne: usize) -> f64 {
    let d = cfg.spatial_dim() as i32;
    let n = ((ne + p).saturating_sub(2) as f64).powi(d);
    let nnz = n * ((2 * p + 1) as f64).powi(d);
    // 8 bytes per value, 8 per column index
    let csr = 16.0 * nnz;
    let explicit = cfg.domain != "identity" || cfg.precond == Precond::Ilu0;
    let mut bytes = 12.0 * 8.0 * n;
    if explicit {
        // assembly holds a second copy while building rows
        bytes += 2.0 * csr;
    }
    if cfg.precond == Precond::Ilu0 {
        bytes += csr;
    }
    bytes
}

fn assemble(cfg: &BenchConfig, g: &GeometryMap<f64>, s: &[SplineSpace<f64>]) -> Result<AssembledSystem<f64>> {
    let k = DiffusionCoefficient::identity(g.dim());
    let mut sys = match cfg.method {
        Method::Collocation => assemble_collocation(g, &k, s, &manufactured_source)?,
        _ => assemble_wq(g, &k, s, &build_wq_rules(s)?, &manufactured_source)?,
    };
    if cfg.rhs == Rhs::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        sys.rhs = (0..sys.rhs.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    }
    Ok(sys)
}

fn solve_with<P: LinearOperator<f64>>(
    sys: &AssembledSystem<f64>,
    pc: &P,
    opts: &BicgstabOptions,
) -> Result<SolveReport> {
    Ok(bicgstab(&sys.operator, pc, &sys.rhs, None, opts)?.1)
}

/// Builds the preconditioner and solves, returning the report with `setup_time` filled in.
fn setup_and_solve(cfg: &BenchConfig, sys: &AssembledSystem<f64>, s: &[SplineSpace<f64>]) -> Result<SolveReport> {
    let opts = BicgstabOptions { tol: cfg.tol, max_iter: cfg.max_iter };
    let t = Instant::now();
    Ok(match cfg.precond {
        Precond::Fd | Precond::Bs => {
            let factors = match cfg.method {
                Method::Collocation => collocation_factors(s),
                _ => galerkin_factors(s)?,
            };
            let backend = if cfg.precond == Precond::Fd { Backend::Fd } else { Backend::Bs };
            let pc = build_preconditioner(&factors, backend, &FdOptions::default())?;
            let setup = t.elapsed().as_secs_f64();
            let mut r = solve_with(sys, &pc, &opts)?;
            r.setup_time = setup;
            r
        }
        Precond::Ilu0 => {
            let a = match &sys.operator {
                SystemOperator::Sparse(a) => a.clone(),
                op => op.to_csr(),
            };
            let pc = Ilu0::new(&a)?;
            let setup = t.elapsed().as_secs_f64();
            let mut r = solve_with(sys, &pc, &opts)?;
            r.setup_time = setup;
            r
        }
        Precond::None => solve_with(sys, &Identity(sys.operator.size()), &opts)?,
    })
}

/// Runs one cell. Errors are recorded in the result, never propagated.
pub fn run_cell(cfg: &BenchConfig, g: &GeometryMap<f64>, p: usize, h: MeshSize) -> CellResult {
    let d = cfg.spatial_dim();
    let dofs = (h.n + p).saturating_sub(2).pow(d as u32);
    let mut cell = CellResult {
        domain: cfg.domain.clone(),
        method: cfg.method.to_string(),
        precond: cfg.precond.to_string(),
        p,
        h,
        dofs,
        status: Status::Failed,
        iterations: None,
        residual: None,
        assembly_time: None,
        setup_time: None,
        solve_time: None,
        total_time: None,
        message: String::new(),
    };
    let predicted = predicted_bytes(cfg, p, h.n) / (1024.0 * 1024.0);
    if predicted > cfg.memory_limit_mb {
        cell.status = Status::Skipped;
        cell.message = format!("predicted {predicted:.0} MiB exceeds limit {:.0} MiB", cfg.memory_limit_mb);
        return cell;
    }
    let run = || -> Result<(f64, SolveReport)> {
        let s = spaces(d, h.n, p)?;
        let t = Instant::now();
        let sys = assemble(cfg, g, &s)?;
        let assembly = t.elapsed().as_secs_f64();
        Ok((assembly, setup_and_solve(cfg, &sys, &s)?))
    };
    match run() {
        Ok((assembly, rep)) => {
            cell.iterations = Some(rep.iterations);
            cell.residual = Some(rep.final_residual);
            cell.assembly_time = Some(assembly);
            cell.setup_time = Some(rep.setup_time);
            cell.solve_time = Some(rep.solve_time);
            cell.total_time = Some(rep.setup_time + rep.solve_time);
            match rep.termination {
                Termination::Converged => cell.status = Status::Converged,
                Termination::MaxIterations => {
                    cell.status = Status::NotConverged;
                    cell.message = format!("no convergence in {} iterations", cfg.max_iter);
                }
                Termination::Breakdown(why) => {
                    cell.status = Status::NotConverged;
                    cell.message = format!("breakdown: {why}");
                }
            }
        }
        Err(e) => cell.message = format!("{e:#}"),
    }
    cell
}

/// Runs every `(h, p)` cell of the grid, `p` outermost. A small untimed warm-up
/// solve precedes the grid.
pub fn run_benchmark(cfg: &BenchConfig, mut progress: impl FnMut(&CellResult)) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let g = geometry(cfg)?;
    if let Some(&p) = cfg.p.iter().min() {
        let warm = BenchConfig { memory_limit_mb: f64::INFINITY, ..cfg.clone() };
        run_cell(&warm, &g, p, MeshSize { n: 4 });
    }
    let mut out = Vec::new();
    for &p in &cfg.p {
        for &h in &cfg.h {
            let cell = run_cell(cfg, &g, p, h);
            progress(&cell);
            out.push(cell);
        }
    }
    Ok(out)
}

/// Spectral diagnostics of the Galerkin discretization preconditioned by the
/// Galerkin Kronecker operator: `e_h`, spectrum of `P^-1 A_G` against the
/// sampled range of `Q`, and the absolute matching distance to `P^-1 A_wq`.
/// Cells too large for dense eigensolvers yield a single `skipped` row.
pub fn run_diagnostics(cfg: &BenchConfig) -> Result<Vec<DiagnosticRow>> {
    cfg.validate()?;
    let g = geometry(cfg)?;
    let d = g.dim();
    let k = DiffusionCoefficient::identity(d);
    let samples = if d <= 2 { 50 } else { 20 };
    let (qlo, qhi) = q_eigenvalue_bounds(&g, &k, samples)?;
    let row = |p: Option<usize>, h: Option<MeshSize>, quantity: &str, value: f64| DiagnosticRow {
        domain: cfg.domain.clone(),
        p,
        h,
        quantity: quantity.into(),
        value,
    };
    let mut rows = vec![row(None, None, "q_min", qlo), row(None, None, "q_max", qhi)];
    for &p in &cfg.p {
        for &h in &cfg.h {
            let s = spaces(d, h.n, p)?;
            let n: usize = s.iter().map(|s| s.dim_interior()).product();
            if n > SPECTRUM_LIMIT {
                rows.push(row(Some(p), Some(h), "skipped", n as f64));
                continue;
            }
            let (p_, h_) = (Some(p), Some(h));
            rows.push(row(p_, h_, "e_h", e_h_for(&g, &k, &s)?));
            let pc = build_preconditioner(&galerkin_factors(&s)?, Backend::Fd, &FdOptions::default())?;
            let ag = preconditioned_spectrum(&assemble_galerkin_matrix(&g, &k, &s, 2)?, &pc)?;
            let (aw, _) = assemble_wq_matrix(&g, &k, &s, &build_wq_rules(&s)?)?;
            let awq = preconditioned_spectrum(&aw, &pc)?;
            let re = ag.real_parts();
            rows.push(row(p_, h_, "spectrum_min", re[0]));
            rows.push(row(p_, h_, "spectrum_max", re[re.len() - 1]));
            rows.push(row(p_, h_, "spectrum_max_imag", ag.max_imag));
            rows.push(row(p_, h_, "contained", f64::from(u8::from(ag.contained_in(qlo, qhi, 1e-8, 1e-8)))));
            let dist = eigenvalue_matching_distance(&ag.eigenvalues, &awq.eigenvalues, MatchingMode::Absolute)?;
            rows.push(row(p_, h_, "matching_distance", dist));
        }
    }
    Ok(rows)
}
