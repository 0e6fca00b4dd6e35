//! Configuration, run orchestration, refinement studies and file output.

mod check;
pub mod cli;
mod config;
mod snapshot;
mod study;
mod vtk;

pub use check::{identity_suite, IdentityResult, IDENTITY_TOL};
pub use config::{parse_field, parse_number, ConfigError, GasConfig, MeshSource, RunConfig};
pub use snapshot::{check_sizes, parse_snapshot, read_snapshot, write_snapshot, write_snapshot_string, SnapshotError, MAGIC};
pub use study::{
    base_mesh, build_case, check_config, converge, diagnose, level_mesh, run_case, Case, CheckReport, ConvergenceReport,
    DiagnoseReport, LevelResult, RunReport,
};
pub use vtk::vtk_string;

use thiserror::Error;

use crate::constitutive::ConstitutiveError;
use crate::diagnostics::DiagnosticsError;
use crate::mesh::io::MeshIoError;
use crate::scheme::SchemeError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshIoError),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("{0}")]
    Scheme(#[from] SchemeError),
    #[error("diagnostics: {0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{0}")]
    Io(String),
}

impl From<ConstitutiveError> for HarnessError {
    fn from(e: ConstitutiveError) -> Self {
        Self::Config(ConfigError::Parameters(e))
    }
}

impl HarnessError {
    /// Process exit code: 1 for rejected parameters, 2 for solver failures,
    /// 3 for IO and parse errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Parameters(_)) => 1,
            Self::Scheme(_) => 2,
            Self::Diagnostics(DiagnosticsError::Domain { .. }) => 1,
            _ => 3,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}
