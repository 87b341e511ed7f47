//! Shooting solution of the per-timestep boundary value problem.
//!
//! The base of the rod is clamped, so only the internal force and moment at
//! `s = 0` are unknown. They are found by damped Newton iteration on the
//! free-end load mismatch, with a forward-difference Jacobian rebuilt every
//! iteration.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    advance_history, propagate, BdfCoeffs, HistoryBuffer, NodeLags, Rod, RodTrajectoryStep,
    StepContext,
};
use crate::error::{Error, Result};
use crate::math::{norm1, solve6, split6, stack6, Mat6, Vec3, Vec6};
use crate::tendon::free_end_bc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Convergence threshold on the scaled residual norm (N).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step.
    pub fd_relative: f64,
    /// Absolute floor of the forward-difference step.
    pub fd_absolute: f64,
    /// Step halvings tried when a Newton step does not reduce the residual.
    pub max_halvings: usize,
    /// On failure, retry by walking the loads over from the previous step.
    pub continuation: bool,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            tolerance: 1e-6,
            max_iterations: 50,
            fd_relative: 1e-7,
            fd_absolute: 1e-9,
            max_halvings: 8,
            continuation: true,
        }
    }
}

impl ShootingConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tolerance > 0.0) {
            out.push(format!(
                "tolerance must be positive (got {})",
                self.tolerance
            ));
        }
        if self.max_iterations < 1 {
            out.push("max_iterations must be at least 1".to_string());
        }
        if !(self.fd_relative > 0.0) || !(self.fd_absolute > 0.0) {
            out.push("finite-difference steps must be positive".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub converged: bool,
    pub iterations: usize,
    /// Scaled residual norm at the returned guess.
    pub residual_norm: f64,
    /// 1-norm condition estimate of the last Jacobian (0 if none was built).
    pub condition: f64,
    /// Load stages used by the continuation fallback (0 for a direct solve).
    pub stages: usize,
}

/// One boundary value problem: everything except the base-load guess.
#[derive(Debug, Clone)]
pub struct BoundaryProblem<'a> {
    pub ctx: StepContext<'a>,
    pub lags: &'a [NodeLags],
    pub tensions: &'a [f64],
    /// External point force at the tip (global, N).
    pub tip_force: Vec3,
    pub time: f64,
}

impl BoundaryProblem<'_> {
    /// Scaling that makes moment residuals commensurate with forces.
    fn moment_scale(&self) -> f64 {
        1.0 / self.ctx.rod.params.length
    }

    fn scaled(&self, r: &Vec6) -> Vec6 {
        let k = self.moment_scale();
        Vec6::new(r[0], r[1], r[2], r[3] * k, r[4] * k, r[5] * k)
    }
}

/// Free-end mismatch `(n(L) − n_req, m(L) − m_req)` for the base loads
/// packed in `guess`, together with the propagated rod.
pub fn residual(problem: &BoundaryProblem, guess: &Vec6) -> Result<(Vec6, RodTrajectoryStep)> {
    let base = split6(guess);
    let step = propagate(
        &problem.ctx,
        base,
        problem.tensions,
        problem.lags,
        problem.time,
    )?;
    let tip = step.tip();
    let (n_req, m_req) = free_end_bc(
        tip,
        problem.tensions,
        &problem.ctx.rod.layout,
        &problem.tip_force,
    )?;
    Ok((stack6(&(tip.n - n_req), &(tip.m - m_req)), step))
}

fn scaled_residual(problem: &BoundaryProblem, guess: &Vec6) -> Result<(Vec6, RodTrajectoryStep)> {
    let (r, step) = residual(problem, guess)?;
    Ok((problem.scaled(&r), step))
}

/// Damped Newton iteration from `warm_start`.
pub fn solve(
    problem: &BoundaryProblem,
    warm_start: &Vec6,
    config: &ShootingConfig,
) -> Result<(Vec6, RodTrajectoryStep, ShootingReport)> {
    if !warm_start.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("warm start must be finite".into()));
    }
    let mut x = *warm_start;
    let (mut r, mut step) = scaled_residual(problem, &x)?;
    let mut norm = r.norm();
    let mut condition = 0.0;
    let mut iterations = 0;

    while norm > config.tolerance {
        if iterations == config.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;

        let mut jac = Mat6::zeros();
        for k in 0..6 {
            let h = (config.fd_relative * x[k].abs()).max(config.fd_absolute);
            let mut xk = x;
            xk[k] += h;
            let (rk, _) = scaled_residual(problem, &xk)?;
            jac.set_column(k, &((rk - r) / h));
        }
        if !jac.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem {
                condition: f64::INFINITY,
                node: None,
            });
        }
        let delta = solve6(&jac, &(-r))?;
        condition = jac
            .try_inverse()
            .map_or(f64::INFINITY, |inv| norm1(&jac) * norm1(&inv));

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial = x + delta * lambda;
            match scaled_residual(problem, &trial) {
                Ok((rt, st)) if rt.norm() < norm => {
                    accepted = Some((trial, rt, st));
                    break;
                }
                Ok((rt, st)) => accepted = Some((trial, rt, st)),
                Err(_) => {}
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, st)) = accepted else {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        };
        x = trial;
        r = rt;
        step = st;
        norm = r.norm();
    }

    Ok((
        x,
        step,
        ShootingReport {
            converged: true,
            iterations,
            residual_norm: norm,
            condition,
            stages: 0,
        },
    ))
}

/// Static equilibrium: all time derivatives frozen at zero.
pub fn solve_static(
    rod: &Rod,
    tensions: &[f64],
    tip_force: &Vec3,
    warm_start: &Vec6,
    config: &ShootingConfig,
) -> Result<(Vec6, RodTrajectoryStep, ShootingReport)> {
    let lags = vec![NodeLags::default(); rod.params.nodes];
    let problem = BoundaryProblem {
        ctx: StepContext::new(rod, BdfCoeffs::statics())?,
        lags: &lags,
        tensions,
        tip_force: *tip_force,
        time: 0.0,
    };
    solve(&problem, warm_start, config)
}

/// Diagnostics of one accepted timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub tip: Vec3,
    pub report: ShootingReport,
}

/// Time-marching state of one rod.
#[derive(Debug, Clone)]
pub struct Simulation {
    rod: Rod,
    coeffs: BdfCoeffs,
    config: ShootingConfig,
    history: HistoryBuffer,
    guess: Vec6,
    last: RodTrajectoryStep,
    time: f64,
    loads: (Vec<f64>, Vec3),
}

impl Simulation {
    /// Starts from the static equilibrium under the initial loads.
    pub fn new(
        rod: Rod,
        coeffs: BdfCoeffs,
        config: ShootingConfig,
        tensions: &[f64],
        tip_force: &Vec3,
    ) -> Result<Self> {
        let (guess, step, _) = solve_static(&rod, tensions, tip_force, &Vec6::zeros(), &config)?;
        Ok(Simulation {
            history: HistoryBuffer::cold_start(&step),
            rod,
            coeffs,
            config,
            guess,
            last: step,
            time: 0.0,
            loads: (tensions.to_vec(), *tip_force),
        })
    }

    pub fn rod(&self) -> &Rod {
        &self.rod
    }
    pub fn coeffs(&self) -> &BdfCoeffs {
        &self.coeffs
    }
    pub fn current(&self) -> &RodTrajectoryStep {
        &self.last
    }
    pub fn base_loads(&self) -> (Vec3, Vec3) {
        split6(&self.guess)
    }
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Advances one timestep with the given tensions and tip force.
    pub fn dynamic_step(&mut self, tensions: &[f64], tip_force: &Vec3) -> Result<StepRecord> {
        let time = self.time + self.coeffs.dt;
        let lags = self.history.lags(&self.coeffs);
        let problem = BoundaryProblem {
            ctx: StepContext::new(&self.rod, self.coeffs)?,
            lags: &lags,
            tensions,
            tip_force: *tip_force,
            time,
        };
        let (guess, step, report) = match solve(&problem, &self.guess, &self.config) {
            Ok(found) => found,
            Err(e) if e.is_solver_failure() && self.config.continuation => {
                self.continuation(&problem, e)?
            }
            Err(e) => return Err(e),
        };
        let history = std::mem::take(&mut self.history);
        self.history = advance_history(&step, history, &self.coeffs);
        self.guess = guess;
        self.last = step;
        self.time = time;
        self.loads = (tensions.to_vec(), *tip_force);
        Ok(StepRecord {
            time,
            tip: self.last.tip().p,
            report,
        })
    }

    /// Walks the loads from the previous step to the requested ones, solving
    /// each intermediate problem from the last solution.
    fn continuation(
        &self,
        target: &BoundaryProblem,
        first_failure: Error,
    ) -> Result<(Vec6, RodTrajectoryStep, ShootingReport)> {
        let (t0, f0) = &self.loads;
        let mut failure = first_failure;
        for stages in [4, 16, 64] {
            let mut guess = self.guess;
            let mut total = 0;
            let mut outcome = None;
            for k in 1..=stages {
                let w = k as f64 / stages as f64;
                let tensions: Vec<f64> = t0
                    .iter()
                    .zip(target.tensions)
                    .map(|(a, b)| a + (b - a) * w)
                    .collect();
                let stage = BoundaryProblem {
                    tensions: &tensions,
                    tip_force: f0 + (target.tip_force - f0) * w,
                    ..target.clone()
                };
                match solve(&stage, &guess, &self.config) {
                    Ok((g, st, rep)) => {
                        guess = g;
                        total += rep.iterations;
                        outcome = Some((st, rep));
                    }
                    Err(e) => {
                        failure = e;
                        outcome = None;
                        break;
                    }
                }
            }
            if let Some((step, report)) = outcome {
                return Ok((
                    guess,
                    step,
                    ShootingReport {
                        iterations: total,
                        stages,
                        ..report
                    },
                ));
            }
        }
        Err(failure)
    }
}
