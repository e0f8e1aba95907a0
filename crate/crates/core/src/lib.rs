//! Matrix-free operators for unfitted (cut) finite element discretizations of
//! the Poisson problem on Cartesian background meshes.
//!
//! The library is generic over the scalar type through [`Real`]; the aliases
//! at the crate root fix it to `f64`, which is what the experiment driver
//! uses.

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod lanes;
pub mod mesh;
pub mod operators;
pub mod perf;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use lanes::{Lanes, Pack};
pub use scalar::Real;

pub use geometry::{CellCategory, FaceCategory};
pub use mesh::dofs::FeKind;

pub type LevelSet = geometry::LevelSet<f64>;
pub type ManufacturedSolution = geometry::ManufacturedSolution<f64>;
pub type AxisBox = geometry::AxisBox<f64>;
pub type CartesianMesh = mesh::CartesianMesh<f64>;
pub type DofHandler = mesh::dofs::DofHandler<f64>;
pub type ShapeInfo = kernels::shape::ShapeInfo<f64>;
pub type Quadrature1D = quadrature::Quadrature1D<f64>;
pub type CutCellRule = quadrature::cut::CutCellRule<f64>;
pub type PoissonOperator = operators::PoissonOperator<f64>;
pub type OperatorConfig = operators::OperatorConfig<f64>;
pub type SparseMatrix = operators::sparse::SparseMatrix<f64>;
