use anyhow::{Context, Result};
use clap::Parser;
use iga_bench::{emit_diagnostics, emit_table, run_benchmark, run_diagnostics, BenchConfig, Format, MeshSize, Precond};
use iga_core::assembly::Method;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Iteration and timing tables for Kronecker-preconditioned spline discretizations.
#[derive(Parser, Debug)]
#[command(name = "iga-bench", version)]
struct Cli {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// quarter_ring, revolved_ring or identity.
    #[arg(long)]
    domain: Option<String>,
    /// Dimension of the identity domain.
    #[arg(long)]
    dim: Option<usize>,
    /// collocation or wq.
    #[arg(long)]
    method: Option<Method>,
    /// fd, bs, ilu0 or none.
    #[arg(long)]
    precond: Option<Precond>,
    /// Degrees, e.g. 2,3,4,5.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Mesh sizes, e.g. 1/32,1/64.
    #[arg(long, value_delimiter = ',')]
    h_list: Option<Vec<MeshSize>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or markdown; inferred from an `.md` output name.
    #[arg(long)]
    format: Option<Format>,
    /// Run the spectral diagnostics instead of the solver grid.
    #[arg(long)]
    diagnostics: bool,
}

impl Cli {
    fn into_config(self) -> Result<(BenchConfig, bool)> {
        let mut cfg = match &self.config {
            Some(path) => BenchConfig::load(path)?,
            None => BenchConfig::default(),
        };
        if let Some(v) = self.domain {
            cfg.domain = v;
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.precond {
            cfg.precond = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.h_list {
            cfg.h = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out {
            cfg.out = Some(v);
        }
        match self.format {
            Some(f) => cfg.format = f,
            None if cfg.out.as_ref().and_then(|o| o.extension()).is_some_and(|e| e == "md") => {
                cfg.format = Format::Markdown
            }
            None => {}
        }
        cfg.validate()?;
        Ok((cfg, self.diagnostics))
    }
}

fn run() -> Result<bool> {
    let (cfg, diagnostics) = Cli::parse().into_config()?;
    let mut out: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    if diagnostics {
        let rows = run_diagnostics(&cfg)?;
        emit_diagnostics(&rows, cfg.format, &mut out)?;
        out.flush()?;
        return Ok(true);
    }
    let results = run_benchmark(&cfg, |c| {
        let its = c.iterations.map_or("-".into(), |i| i.to_string());
        eprintln!("p={} h={} dofs={} {:?} iterations={its} {}", c.p, c.h, c.dofs, c.status, c.message);
    })?;
    emit_table(&results, cfg.format, &mut out)?;
    out.flush()?;
    Ok(results.iter().all(|c| c.completed()))
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
