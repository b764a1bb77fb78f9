pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod fastdiag;
pub mod geometry;
pub mod krylov;
pub mod quadrature;
pub mod scalar;
pub mod sparse;
pub mod splines;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type KnotVectorF64 = splines::KnotVector<f64>;
pub type KnotVectorF32 = splines::KnotVector<f32>;
pub type SplineSpaceF64 = splines::SplineSpace<f64>;
pub type SplineSpaceF32 = splines::SplineSpace<f32>;
pub type GeometryMapF64 = geometry::GeometryMap<f64>;
pub type GeometryMapF32 = geometry::GeometryMap<f32>;
pub type CsrMatrixF64 = sparse::CsrMatrix<f64>;
pub type CsrMatrixF32 = sparse::CsrMatrix<f32>;
pub type KroneckerSumOperatorF64 = tensor::KroneckerSumOperator<f64>;
pub type KroneckerSumOperatorF32 = tensor::KroneckerSumOperator<f32>;
pub type PreconditionerF64 = fastdiag::Preconditioner<f64>;
pub type PreconditionerF32 = fastdiag::Preconditioner<f32>;
pub type Ilu0F64 = krylov::Ilu0<f64>;
pub type Ilu0F32 = krylov::Ilu0<f32>;
