//! Nonlinear solve of one implicit step and the time loop.
//!
//! The default is a Picard iteration: the continuity block is solved for `ρ`
//! with the velocity frozen (an M-matrix system, so the density stays
//! positive), then the momentum block for `u` with `ρ` and the convecting
//! velocity frozen. Small systems fall back to Newton with a
//! finite-difference Jacobian when Picard fails.

use super::residual::{
    continuity_operator, momentum_operator, pack_velocity, residual_continuity, residual_momentum,
    unpack_velocity,
};
use super::{check_positive, Problem, SchemeError, State, Trajectory};
use crate::linalg::solve_dense;
use crate::spaces::QField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Picard, then Picard with halved relaxation, then Newton on small systems.
    Auto,
    Picard,
    Newton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Residual evaluations of the accepted attempt.
    pub iterations: usize,
    /// Scaled residual after each iteration of the accepted attempt.
    pub residual_history: Vec<f64>,
    pub strategy: Strategy,
    pub relaxation: f64,
}

/// Residual measured against the tolerance: converged iff `ratio ≤ 1`.
#[derive(Debug, Clone, Copy)]
struct Measure {
    ratio: f64,
    scaled: f64,
}

fn measure(prob: &Problem, prev: &State, cand: &State) -> Result<Measure, SchemeError> {
    let mesh = &prob.mesh;
    let p = &prob.params;
    let rc = residual_continuity(prob, prev, cand)?;
    let rm = residual_momentum(prob, prev, cand)?;
    let cont = prob.dt * rc.iter().map(|r| r.abs()).sum::<f64>();
    let mom = prob.dt * rm.iter().map(|r| r.norm()).sum::<f64>();
    let mass = prev.rho.integral(mesh);
    let vhat = prev.v(&prob.bdata).hat(mesh).values;
    let momentum = 1.0
        + (0..mesh.num_cells())
            .map(|k| mesh.volume(k) * prev.rho.values[k] * vhat[k].norm())
            .sum::<f64>();
    let ratio = (cont / (p.tol_abs + p.tol_rel * mass)).max(mom / (p.tol_abs + p.tol_rel * momentum));
    let scaled = (cont / mass).max(mom / momentum);
    Ok(Measure {
        ratio: if ratio.is_finite() { ratio } else { f64::INFINITY },
        scaled: if scaled.is_finite() { scaled } else { f64::INFINITY },
    })
}

fn first_nonpositive(rho: &[f64]) -> Option<(usize, f64)> {
    rho.iter().enumerate().find(|(_, &r)| !(r > 0.0)).map(|(i, &r)| (i, r))
}

fn picard(prob: &Problem, prev: &State, theta: f64) -> Result<(State, StepInfo), SchemeError> {
    let mesh = &prob.mesh;
    let t = prev.t + prob.dt;
    let mut cand = State {
        k: prev.k + 1,
        t,
        rho: prev.rho.clone(),
        u: prev.u.clone(),
    };
    let info = |history: Vec<f64>| StepInfo {
        iterations: history.len(),
        residual_history: history,
        strategy: Strategy::Picard,
        relaxation: theta,
    };
    let m = measure(prob, prev, &cand)?;
    let mut history = vec![m.scaled];
    if m.ratio <= 1.0 {
        return Ok((cand, info(history)));
    }
    for it in 1..=prob.params.max_iters {
        let rho = continuity_operator(prob, prev, &cand.u, t).solve()?;
        if let Some((cell, value)) = first_nonpositive(&rho) {
            return Err(SchemeError::NegativeDensity { cell, value, iterations: it });
        }
        let rho = QField { values: rho };
        let x = momentum_operator(prob, prev, &rho, &cand.u, t).solve()?;
        let old = pack_velocity(mesh, &cand.u);
        let x: Vec<f64> = x.iter().zip(&old).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        cand.rho = rho;
        cand.u = unpack_velocity(mesh, &prob.bdata, &x);
        let m = measure(prob, prev, &cand)?;
        history.push(m.scaled);
        if !m.scaled.is_finite() || m.scaled > 1e8 * history[0].max(1e-300) {
            break;
        }
        if m.ratio <= 1.0 {
            // one more density solve makes the discrete mass balance exact
            // for the accepted velocity
            let rho = continuity_operator(prob, prev, &cand.u, t).solve()?;
            if first_nonpositive(&rho).is_none() {
                let polished = State {
                    rho: QField { values: rho },
                    ..cand.clone()
                };
                let mp = measure(prob, prev, &polished)?;
                if mp.ratio <= 1.0 {
                    *history.last_mut().unwrap() = mp.scaled;
                    return Ok((polished, info(history)));
                }
            }
            return Ok((cand, info(history)));
        }
    }
    Err(SchemeError::NonlinearDivergence {
        iterations: history.len(),
        last: *history.last().unwrap(),
        history,
    })
}

fn unknowns(prob: &Problem, s: &State) -> Vec<f64> {
    let mut x = s.rho.values.clone();
    x.extend(pack_velocity(&prob.mesh, &s.u));
    x
}

fn state_from(prob: &Problem, prev: &State, x: &[f64]) -> State {
    let nc = prob.mesh.num_cells();
    State {
        k: prev.k + 1,
        t: prev.t + prob.dt,
        rho: QField {
            values: x[..nc].to_vec(),
        },
        u: unpack_velocity(&prob.mesh, &prob.bdata, &x[nc..]),
    }
}

fn full_residual(prob: &Problem, prev: &State, x: &[f64]) -> Result<Vec<f64>, SchemeError> {
    let cand = state_from(prob, prev, x);
    let mut r = residual_continuity(prob, prev, &cand)?;
    for v in residual_momentum(prob, prev, &cand)? {
        r.extend(v.iter());
    }
    Ok(r)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn newton(prob: &Problem, prev: &State) -> Result<(State, StepInfo), SchemeError> {
    let mut x = unknowns(prob, prev);
    let n = x.len();
    let info = |history: Vec<f64>| StepInfo {
        iterations: history.len(),
        residual_history: history,
        strategy: Strategy::Newton,
        relaxation: 1.0,
    };
    let mut f = full_residual(prob, prev, &x)?;
    let m = measure(prob, prev, &state_from(prob, prev, &x))?;
    let mut history = vec![m.scaled];
    if m.ratio <= 1.0 {
        return Ok((state_from(prob, prev, &x), info(history)));
    }
    let nc = prob.mesh.num_cells();
    for _ in 0..prob.params.max_iters {
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let e = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += e;
            let fp = full_residual(prob, prev, &xp)?;
            for i in 0..n {
                jac[i][j] = (fp[i] - f[i]) / e;
            }
        }
        let neg: Vec<f64> = f.iter().map(|a| -a).collect();
        let dx = solve_dense(jac, &neg)?;
        let f0 = norm2(&f);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            if first_nonpositive(&xt[..nc]).is_none() {
                let ft = full_residual(prob, prev, &xt)?;
                if norm2(&ft) < f0 {
                    x = xt;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        let m = measure(prob, prev, &state_from(prob, prev, &x))?;
        history.push(m.scaled);
        if m.ratio <= 1.0 {
            return Ok((state_from(prob, prev, &x), info(history)));
        }
        if !accepted {
            break;
        }
    }
    Err(SchemeError::NonlinearDivergence {
        iterations: history.len(),
        last: *history.last().unwrap(),
        history,
    })
}

/// Advances `prev` by one time step.
pub fn step(prob: &Problem, prev: &State) -> Result<(State, StepInfo), SchemeError> {
    prev.check(&prob.mesh, &prob.bdata)?;
    let theta = prob.params.relaxation;
    let small = prob.num_unknowns() <= prob.params.newton_max_unknowns;
    let (state, info) = match prob.params.strategy {
        Strategy::Newton => newton(prob, prev)?,
        Strategy::Picard => match picard(prob, prev, theta) {
            Err(SchemeError::NegativeDensity { .. }) => picard(prob, prev, 0.5 * theta)?,
            r => r?,
        },
        Strategy::Auto => match picard(prob, prev, theta) {
            Ok(r) => r,
            Err(e @ (SchemeError::NegativeDensity { .. }
            | SchemeError::NonlinearDivergence { .. }
            | SchemeError::LinearSolveFailure(_))) => {
                log::info!("Picard failed ({e}); retrying with relaxation {}", 0.5 * theta);
                match picard(prob, prev, 0.5 * theta) {
                    Ok(r) => r,
                    Err(e2) if small => {
                        log::info!("Picard failed again ({e2}); switching to Newton");
                        newton(prob, prev)?
                    }
                    Err(e2) => return Err(e2),
                }
            }
            Err(e) => return Err(e),
        },
    };
    check_positive(&state.rho)?;
    Ok((state, info))
}

/// Runs `N = T/Δt` steps from `initial`, calling `observe` after each
/// accepted step.
pub fn run_with(
    prob: &Problem,
    initial: State,
    mut observe: impl FnMut(&State, &StepInfo),
) -> Result<Trajectory, (Trajectory, SchemeError)> {
    let n = prob.num_steps();
    let mut traj = Trajectory {
        dt: prob.dt,
        states: vec![initial],
        info: Vec::new(),
    };
    for k in 1..=n {
        match step(prob, traj.last()) {
            Ok((s, info)) => {
                log::debug!(
                    "step {k}/{n}: {} iterations ({:?}), residual {:e}, min rho {:e}",
                    info.iterations,
                    info.strategy,
                    info.residual_history.last().copied().unwrap_or(0.0),
                    s.min_rho()
                );
                observe(&s, &info);
                traj.states.push(s);
                traj.info.push(info);
            }
            Err(e) => {
                let err = SchemeError::AtStep {
                    step: k,
                    source: Box::new(e),
                };
                return Err((traj, err));
            }
        }
    }
    Ok(traj)
}

pub fn run(prob: &Problem, initial: State) -> Result<Trajectory, SchemeError> {
    run_with(prob, initial, |_, _| {}).map_err(|(_, e)| e)
}
