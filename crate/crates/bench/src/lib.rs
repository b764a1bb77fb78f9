//! Benchmark driver: iteration and timing tables over `(h, p)` grids, and spectral diagnostics.

pub mod config;
pub mod run;
pub mod table;

pub use config::{BenchConfig, Format, MeshSize, Precond, Rhs};
pub use run::{run_benchmark, run_cell, run_diagnostics, CellResult, DiagnosticRow, Status};
pub use table::{emit_diagnostics, emit_table, read_table};
