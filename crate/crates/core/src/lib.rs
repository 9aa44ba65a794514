//! Saint-Venant functionals, q-torsion solvers and torsional rigidity on
//! planar domains.
//!
//! The crate is organised in layers:
//!
//! * [`geometry`] describes domains and provides closed-form and radial
//!   reference solutions;
//! * [`mesh`] triangulates domains and integrates fields over them;
//! * [`fem`] assembles and solves weighted Poisson problems, including
//!   floating (constant but unknown) boundary values;
//! * [`qtorsion`] iterates the nonlinear q-torsion problem;
//! * [`functionals`] computes the Saint-Venant functional, torsional
//!   rigidity and the boundary-value minimisation constants;
//! * [`verify`] and [`report`] adjudicate inequalities between those
//!   constants and serialise results.
//!
//! All numerics are generic over the scalar type through [`scalar::Real`];
//! the crate root exports `f64` aliases for the common case.

pub mod error;
pub mod scalar;

pub mod fem;
pub mod functionals;
pub mod geometry;
pub mod mesh;
pub mod qtorsion;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` domain description.
pub type DomainSpec = geometry::DomainSpec<f64>;
/// `f64` domain shape.
pub type DomainKind = geometry::DomainKind<f64>;
/// `f64` radial solution profile.
pub type RadialProfile = geometry::RadialProfile<f64>;
/// `f64` triangulation.
pub type Mesh = mesh::Mesh<f64>;
/// `f64` nodal field.
pub type ScalarField = mesh::ScalarField<f64>;
/// `f64` iteration settings.
pub type SolverConfig = qtorsion::SolverConfig<f64>;
/// `f64` three-route torsion functional values.
pub type QqRoutes = functionals::QqRoutes<f64>;
/// `f64` boundary-minimisation solution.
pub type BpSolution = functionals::BpSolution<f64>;
/// `f64` per-domain constants bundle.
pub type ConstantsReport = functionals::ConstantsReport<f64>;
