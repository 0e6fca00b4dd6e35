//! Mixed finite-volume / Crouzeix-Raviart discretization of the barotropic
//! compressible Navier-Stokes equations with general inflow/outflow boundary
//! conditions on tetrahedral meshes.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`]: tetrahedral meshes, admissibility, boundary classification,
//!   red refinement and the `tetmesh` file format.
//! * [`quadrature`]: simplex quadrature rules.
//! * [`spaces`]: piecewise-constant fields, Crouzeix-Raviart fields, broken
//!   operators and norms.
//! * [`constitutive`]: pressure laws, Helmholtz potentials, renormalizations.
//! * [`upwind`]: upwind values, face fluxes and their summation identities.
//! * [`analytic`]: closed-form space-time fields used as data, references and
//!   manufactured sources.
//! * [`scheme`]: residual assembly and the implicit nonlinear time step.
//! * [`diagnostics`]: discrete balances, uniform-estimate norms, renormalized
//!   continuity, consistency probes and relative energy.
//! * [`harness`]: configuration, snapshot/VTK/CSV IO, studies and the CLI.

pub mod analytic;
pub mod constitutive;
pub mod diagnostics;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod scheme;
pub mod spaces;
pub mod upwind;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
