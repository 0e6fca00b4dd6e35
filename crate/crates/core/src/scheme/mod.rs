//! The implicit upwind / Crouzeix-Raviart scheme: data, residuals and the
//! nonlinear time step.
//!
//! Unknowns per step are the cell densities `ρ_K` and the interior face
//! velocities `u_σ`; boundary velocity dofs are pinned to `u_{B,σ}`.

mod residual;
mod solver;

pub use residual::{
    continuity_operator, momentum_operator, residual_continuity, residual_momentum, AffineOperator,
};
pub use solver::{run, run_with, step, StepInfo, Strategy};

use thiserror::Error;

use crate::analytic::MmsSources;
use crate::constitutive::{GasModel, RegularizedPressure};
use crate::linalg::LinalgError;
use crate::mesh::{classify_boundary, default_zero_tol, BoundaryError, BoundaryPartition, FaceKind, Mesh};
use crate::quadrature::tet_collapsed;
use crate::spaces::{proj_q, proj_v, QField, VField};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("field sizes do not match the mesh")]
    MeshMismatch,
    #[error("velocity dof on boundary face {face} differs from u_B")]
    NotPinned { face: usize },
    #[error("nonpositive density {value} in cell {cell}")]
    NonPositiveDensity { cell: usize, value: f64 },
    #[error("boundary density is nonpositive in inflow cell {cell}")]
    BoundaryDensity { cell: usize },
    #[error("negative density {value} in cell {cell} after {iterations} iterations")]
    NegativeDensity {
        cell: usize,
        value: f64,
        iterations: usize,
    },
    #[error("nonlinear iteration did not converge in {iterations} iterations (last residual {last:e})")]
    NonlinearDivergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(#[from] LinalgError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SchemeError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// `Δt = h`.
    MeshSize,
    /// `Δt = c h`.
    Scaled(f64),
    /// A fixed value independent of the mesh.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub omega: f64,
    /// Adds `h^β ρ²` to the pressure.
    pub regularization: bool,
    pub dt_policy: DtPolicy,
    pub t_final: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
    /// Under-relaxation of the velocity update, in `(0, 1]`.
    pub relaxation: f64,
    pub strategy: Strategy,
    /// Largest system handled by the Newton fallback.
    pub newton_max_unknowns: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.0,
            beta: 0.25,
            omega: 0.5,
            regularization: true,
            dt_policy: DtPolicy::MeshSize,
            t_final: 0.0,
            tol_abs: 1e-12,
            tol_rel: 1e-10,
            max_iters: 200,
            relaxation: 1.0,
            strategy: Strategy::Auto,
            newton_max_unknowns: 1200,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: &str| Err(SchemeError::InvalidParams(m.to_string()));
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.lambda + 2.0 / 3.0 * self.mu > 0.0) {
            return bad("lambda + 2/3 mu must be positive");
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad("relaxation must lie in (0, 1]");
        }
        if !(self.tol_abs >= 0.0 && self.tol_rel >= 0.0 && self.tol_abs + self.tol_rel > 0.0) {
            return bad("solver tolerances must be nonnegative and not both zero");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.t_final >= 0.0) {
            return bad("T_final must be nonnegative");
        }
        match self.dt_policy {
            DtPolicy::Scaled(c) | DtPolicy::Fixed(c) if !(c > 0.0) => bad("time step must be positive"),
            _ => Ok(()),
        }
    }

    pub fn dt(&self, h: f64) -> f64 {
        match self.dt_policy {
            DtPolicy::MeshSize => h,
            DtPolicy::Scaled(c) => c * h,
            DtPolicy::Fixed(dt) => dt,
        }
    }

    /// Number of steps; rounded up with a warning when `T/Δt` is not integral.
    pub fn num_steps(&self, dt: f64) -> usize {
        let q = self.t_final / dt;
        let n = q.round();
        if (q - n).abs() <= 1e-9 * q.max(1.0) {
            n as usize
        } else {
            log::warn!("T_final / dt = {q} is not an integer; using {} steps", q.ceil());
            q.ceil() as usize
        }
    }
}

/// Boundary data `ρ_B = Π^Q r_B`, `u_B = Π^V 𝔲_B` and the induced partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub rho_b: QField<f64>,
    pub u_b: VField<Vec3>,
    pub partition: BoundaryPartition,
}

impl BoundaryData {
    pub fn new(mesh: &Mesh, rho_b: QField<f64>, u_b: VField<Vec3>) -> Result<Self, SchemeError> {
        if rho_b.values.len() != mesh.num_cells() {
            return Err(SchemeError::MeshMismatch);
        }
        let partition = classify_boundary(mesh, &u_b, default_zero_tol(&u_b))?;
        for &f in &partition.inflow_faces {
            let cell = mesh.face(f).owner;
            if !(rho_b.values[cell] > 0.0) {
                return Err(SchemeError::BoundaryDensity { cell });
            }
        }
        Ok(Self { rho_b, u_b, partition })
    }

    pub fn from_fns(
        mesh: &Mesh,
        rho_b: impl Fn(&Vec3) -> f64,
        u_b: impl Fn(&Vec3) -> Vec3,
    ) -> Result<Self, SchemeError> {
        Self::new(mesh, proj_q(mesh, rho_b), proj_v(mesh, u_b))
    }
}

/// Everything a time step needs besides the states.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub bdata: BoundaryData,
    pub params: SchemeParams,
    pub pressure: RegularizedPressure,
    pub h: f64,
    pub dt: f64,
    /// `h^ω`.
    pub penalty: f64,
    pub sources: Option<MmsSources>,
}

impl Problem {
    pub fn new(mesh: Mesh, bdata: BoundaryData, params: SchemeParams, gas: GasModel) -> Result<Self, SchemeError> {
        params.validate()?;
        if bdata.u_b.dofs.len() != mesh.num_faces() || bdata.rho_b.values.len() != mesh.num_cells() {
            return Err(SchemeError::MeshMismatch);
        }
        let h = mesh.h();
        let dt = params.dt(h);
        let pressure = RegularizedPressure::new(gas, h, params.beta, params.regularization);
        let penalty = h.powf(params.omega);
        Ok(Self {
            mesh,
            bdata,
            params,
            pressure,
            h,
            dt,
            penalty,
            sources: None,
        })
    }

    /// Enables manufactured sources. The pressure inside them is replaced by
    /// this problem's regularized law.
    pub fn with_sources(mut self, mut sources: MmsSources) -> Self {
        sources.pressure = self.pressure.clone();
        self.sources = Some(sources);
        self
    }

    pub fn kind(&self, f: usize) -> FaceKind {
        self.bdata.partition.kind(f)
    }

    /// `(∫_K s_ρ, ∫_K s_m)` per cell at time `t`.
    pub fn source_loads(&self, t: f64) -> Option<(Vec<f64>, Vec<Vec3>)> {
        let s = self.sources.as_ref()?;
        let rule = tet_collapsed(4);
        let mut sr = Vec::with_capacity(self.mesh.num_cells());
        let mut sm = Vec::with_capacity(self.mesh.num_cells());
        for k in 0..self.mesh.num_cells() {
            let vol = self.mesh.volume(k);
            let (mut a, mut b) = (0.0, Vec3::zeros());
            for (x, w) in rule.map(&self.mesh.cell_points(k)) {
                a += w * s.s_rho(&x, t);
                b += s.s_m(&x, t) * w;
            }
            sr.push(a * vol);
            sm.push(b * vol);
        }
        Some((sr, sm))
    }

    pub fn num_steps(&self) -> usize {
        self.params.num_steps(self.dt)
    }

    /// Total unknowns of the coupled system.
    pub fn num_unknowns(&self) -> usize {
        self.mesh.num_cells() + 3 * self.mesh.interior_faces().len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub k: usize,
    pub t: f64,
    pub rho: QField<f64>,
    pub u: VField<Vec3>,
}

impl State {
    pub fn v(&self, bdata: &BoundaryData) -> VField<Vec3> {
        self.u.sub(&bdata.u_b)
    }

    pub fn check(&self, mesh: &Mesh, bdata: &BoundaryData) -> Result<(), SchemeError> {
        if self.rho.values.len() != mesh.num_cells() || self.u.dofs.len() != mesh.num_faces() {
            return Err(SchemeError::MeshMismatch);
        }
        for &f in mesh.boundary_faces() {
            if self.u.dofs[f] != bdata.u_b.dofs[f] {
                return Err(SchemeError::NotPinned { face: f });
            }
        }
        check_positive(&self.rho)
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_positive(rho: &QField<f64>) -> Result<(), SchemeError> {
    for (cell, &value) in rho.values.iter().enumerate() {
        if !(value > 0.0) {
            return Err(SchemeError::NonPositiveDensity { cell, value });
        }
    }
    Ok(())
}

/// Projects the initial data and pins the boundary velocity dofs to `u_B`.
pub fn init(
    mesh: &Mesh,
    bdata: &BoundaryData,
    rho0: impl Fn(&Vec3) -> f64,
    u0: impl Fn(&Vec3) -> Vec3,
) -> Result<State, SchemeError> {
    let rho = proj_q(mesh, rho0);
    check_positive(&rho)?;
    let mut u = proj_v(mesh, u0);
    let mut gap: f64 = 0.0;
    for &f in mesh.boundary_faces() {
        gap = gap.max((u.dofs[f] - bdata.u_b.dofs[f]).norm());
        u.dofs[f] = bdata.u_b.dofs[f];
    }
    if gap > 1e-12 {
        log::warn!("initial velocity differs from u_B on the boundary by {gap:e}; pinned");
    }
    Ok(State { k: 0, t: 0.0, rho, u })
}

/// States `k = 0..N` at uniform spacing `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
    pub info: Vec<StepInfo>,
}

impl Trajectory {
    pub fn num_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Index of the piecewise-constant interpolant at `t`: state `k` on `(t_{k-1}, t_k]`.
    pub fn index_at(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        ((t / self.dt - 1e-12).ceil() as usize).min(self.num_steps())
    }

    pub fn pwt(&self, t: f64) -> &State {
        &self.states[self.index_at(t)]
    }

    /// Time-affine interpolant of the velocity, `u^{k-1}` at `t_{k-1}` to `u^k` at `t_k`.
    pub fn pwt_plus_u(&self, t: f64) -> VField<Vec3> {
        let k = self.index_at(t);
        if k == 0 {
            return self.states[0].u.clone();
        }
        let s = ((t - (k - 1) as f64 * self.dt) / self.dt).clamp(0.0, 1.0);
        self.states[k - 1].u.scale(1.0 - s).add(&self.states[k].u.scale(s))
    }

    /// `D_t ρ^k = (ρ^k - ρ^{k-1}) / Δt` for `k ≥ 1`.
    pub fn dt_rho(&self, k: usize) -> QField<f64> {
        let (a, b) = (&self.states[k - 1].rho, &self.states[k].rho);
        QField {
            values: a.values.iter().zip(&b.values).map(|(x, y)| (y - x) / self.dt).collect(),
        }
    }
}
