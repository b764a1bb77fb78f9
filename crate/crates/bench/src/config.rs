//! Benchmark configuration: one TOML document per run, overridable from the command line.

use anyhow::{bail, ensure, Context, Result};
use iga_core::assembly::Method;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precond {
    Fd,
    Bs,
    Ilu0,
    None,
}

impl fmt::Display for Precond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precond::Fd => "fd",
            Precond::Bs => "bs",
            Precond::Ilu0 => "ilu0",
            Precond::None => "none",
        })
    }
}

impl FromStr for Precond {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fd" => Precond::Fd,
            "bs" => Precond::Bs,
            "ilu0" | "ilu" => Precond::Ilu0,
            "none" => Precond::None,
            _ => bail!("unknown preconditioner {s:?} (expected fd, bs, ilu0 or none)"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "csv" => Format::Csv,
            "markdown" | "md" => Format::Markdown,
            _ => bail!("unknown format {s:?} (expected csv or markdown)"),
        })
    }
}

/// Right-hand side of every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rhs {
    /// Load vector of the manufactured source `f = -Δu`.
    Manufactured,
    /// Uniform entries in `[-1, 1)` drawn from `seed`.
    Random,
}

/// A mesh size `h = 1/n`, written either as `"1/n"` or as a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "HValue", into = "String")]
pub struct MeshSize {
    /// Elements per direction.
    pub n: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HValue {
    Num(f64),
    Str(String),
}

impl TryFrom<HValue> for MeshSize {
    type Error = anyhow::Error;

    fn try_from(v: HValue) -> Result<Self> {
        match v {
            HValue::Num(h) => MeshSize::from_h(h),
            HValue::Str(s) => s.parse(),
        }
    }
}

impl From<MeshSize> for String {
    fn from(m: MeshSize) -> String {
        m.to_string()
    }
}

impl MeshSize {
    pub fn from_h(h: f64) -> Result<Self> {
        ensure!(h > 0.0 && h <= 1.0, "mesh size {h} outside (0, 1]");
        let n = (1.0 / h).round();
        ensure!((1.0 / n - h).abs() <= 1e-9 * h, "mesh size {h} is not 1/n");
        Ok(MeshSize { n: n as usize })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

impl fmt::Display for MeshSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.n)
    }
}

impl FromStr for MeshSize {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.strip_prefix("1/") {
            Some(n) => {
                let n: usize = n.parse().with_context(|| format!("bad mesh size {s:?}"))?;
                ensure!(n > 0, "mesh size 1/0");
                Ok(MeshSize { n })
            }
            None => MeshSize::from_h(s.parse().with_context(|| format!("bad mesh size {s:?}"))?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `quarter_ring`, `revolved_ring` or `identity`.
    pub domain: String,
    /// Spatial dimension; only read for `identity`, the rings fix their own.
    pub dim: usize,
    pub method: Method,
    pub p: Vec<usize>,
    pub h: Vec<MeshSize>,
    pub precond: Precond,
    pub tol: f64,
    pub max_iter: usize,
    /// Written to stdout when absent.
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub rhs: Rhs,
    /// Cells whose predicted storage exceeds this are skipped and marked `*`.
    pub memory_limit_mb: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            domain: "quarter_ring".into(),
            dim: 2,
            method: Method::Collocation,
            p: vec![2, 3, 4, 5],
            h: [32, 64, 128].iter().map(|&n| MeshSize { n }).collect(),
            precond: Precond::Fd,
            tol: 1e-8,
            max_iter: 1000,
            out: None,
            format: Format::Csv,
            seed: 0,
            rhs: Rhs::Manufactured,
            memory_limit_mb: 4096.0,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid benchmark config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Dimension implied by the domain.
    pub fn spatial_dim(&self) -> usize {
        match self.domain.as_str() {
            "quarter_ring" => 2,
            "revolved_ring" | "revolved_quarter_ring" => 3,
            _ => self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            matches!(self.domain.as_str(), "quarter_ring" | "revolved_ring" | "revolved_quarter_ring" | "identity"),
            "unknown domain {:?} (expected quarter_ring, revolved_ring or identity)",
            self.domain
        );
        ensure!(matches!(self.spatial_dim(), 1..=3), "dimension must be 1, 2 or 3");
        ensure!(
            matches!(self.method, Method::Collocation | Method::Wq),
            "method must be collocation or wq"
        );
        ensure!(self.p.iter().all(|&p| (1..=10).contains(&p)), "degrees must lie in 1..=10");
        if self.method == Method::Collocation {
            ensure!(self.p.iter().all(|&p| p >= 2), "collocation needs degree >= 2");
        }
        ensure!(self.tol > 0.0 && self.tol < 1.0, "tol must lie in (0, 1)");
        ensure!(self.max_iter > 0, "max_iter must be positive");
        ensure!(self.memory_limit_mb > 0.0, "memory_limit_mb must be positive");
        Ok(())
    }
}
