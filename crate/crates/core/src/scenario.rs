//! Closed-loop experiments: reference trajectory, load scenarios, the
//! simulation loop and the tracking metrics.

use serde::{Deserialize, Serialize};

use crate::control::{
    backstepping_control, clamp_tension, lyapunov_values, plant_terms, smc_control,
    tendon_displacements, BacksteppingGains, LyapunovValues, PlantTerms, RefPoint, SmcGains,
    B_C_FLOOR, DEFAULT_T_MAX,
};
use crate::dynamics::{BdfCoeffs, Rod};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rod::{RodParams, TendonLayout};
use crate::shooting::{ShootingConfig, ShootingReport, Simulation};

/// `x_d(t) = A (1 − e^(−λt))` along the control axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceTrajectory {
    /// Final position A (m).
    pub amplitude: f64,
    /// Rate λ (1/s).
    pub rate: f64,
}

impl Default for ReferenceTrajectory {
    fn default() -> Self {
        ReferenceTrajectory {
            amplitude: 0.340,
            rate: 20.0,
        }
    }
}

impl ReferenceTrajectory {
    /// Position, velocity and acceleration at time `t`.
    pub fn reference(&self, t: f64) -> RefPoint {
        let decay = (-self.rate * t).exp();
        RefPoint {
            x: self.amplitude * (1.0 - decay),
            v: self.amplitude * self.rate * decay,
            a: -self.amplitude * self.rate * self.rate * decay,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.amplitude > 0.0) {
            out.push(format!(
                "amplitude must be positive (got {})",
                self.amplitude
            ));
        }
        if !(self.rate > 0.0) {
            out.push(format!("rate must be positive (got {})", self.rate));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Nominal,
    TipWeight,
    Disturbance,
}

/// External tip loads applied during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Hanging mass at the tip (kg).
    #[serde(default = "default_weight_mass")]
    pub weight_mass: f64,
    /// Direction of the weight force.
    #[serde(default = "default_weight_direction")]
    pub weight_direction: [f64; 3],
    /// Impulse force (N).
    #[serde(default = "default_disturbance_force")]
    pub disturbance_force: [f64; 3],
    /// Iteration at which the impulse starts.
    #[serde(default = "default_disturbance_start")]
    pub disturbance_start: usize,
    /// Number of iterations the impulse lasts.
    #[serde(default = "default_disturbance_duration")]
    pub disturbance_duration: usize,
}

fn default_weight_mass() -> f64 {
    0.020
}
fn default_weight_direction() -> [f64; 3] {
    [-1.0, 0.0, 0.0]
}
fn default_disturbance_force() -> [f64; 3] {
    [10.0, 0.0, -10.0]
}
fn default_disturbance_start() -> usize {
    50
}
fn default_disturbance_duration() -> usize {
    1
}

impl Scenario {
    pub fn nominal() -> Self {
        Scenario {
            kind: ScenarioKind::Nominal,
            weight_mass: default_weight_mass(),
            weight_direction: default_weight_direction(),
            disturbance_force: default_disturbance_force(),
            disturbance_start: default_disturbance_start(),
            disturbance_duration: default_disturbance_duration(),
        }
    }

    pub fn tip_weight(mass: f64) -> Self {
        Scenario {
            kind: ScenarioKind::TipWeight,
            weight_mass: mass,
            ..Self::nominal()
        }
    }

    pub fn disturbance() -> Self {
        Scenario {
            kind: ScenarioKind::Disturbance,
            ..Self::nominal()
        }
    }

    /// Tip force during control iteration `iteration` (0-based).
    pub fn tip_force(&self, iteration: usize, gravity: &Vec3) -> Vec3 {
        match self.kind {
            ScenarioKind::Nominal => Vec3::zeros(),
            ScenarioKind::TipWeight => {
                Vec3::from(self.weight_direction).normalize() * self.weight_mass * gravity.norm()
            }
            ScenarioKind::Disturbance => {
                let window =
                    self.disturbance_start..self.disturbance_start + self.disturbance_duration;
                if window.contains(&iteration) {
                    Vec3::from(self.disturbance_force)
                } else {
                    Vec3::zeros()
                }
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.weight_mass >= 0.0) {
            out.push(format!(
                "weight_mass must be non-negative (got {})",
                self.weight_mass
            ));
        }
        if !(Vec3::from(self.weight_direction).norm() > 0.0) {
            out.push("weight_direction must be non-zero".to_string());
        }
        if self.disturbance_duration < 1 {
            out.push("disturbance_duration must be at least 1".to_string());
        }
        if !self.disturbance_force.iter().all(|f| f.is_finite()) {
            out.push("disturbance_force must be finite".to_string());
        }
        out
    }
}

/// Control law driving the actuated tendon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Controller {
    Backstepping(BacksteppingGains),
    SlidingMode(SmcGains),
    /// Open loop with a fixed tension.
    Constant {
        tension: f64,
    },
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Backstepping(_) => "backstepping",
            Controller::SlidingMode(_) => "sliding-mode",
            Controller::Constant { .. } => "constant",
        }
    }

    pub fn violations(&self) -> Vec<String> {
        match self {
            Controller::Backstepping(g) => g.violations(),
            Controller::SlidingMode(g) => g.violations(),
            Controller::Constant { tension } if !(*tension >= 0.0) => {
                vec![format!("tension must be non-negative (got {tension})")]
            }
            Controller::Constant { .. } => Vec::new(),
        }
    }
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopSetup {
    #[serde(default)]
    pub rod: RodParams,
    #[serde(default)]
    pub tendons: TendonLayout,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub shooting: ShootingConfig,
    pub controller: Controller,
    /// Index of the tendon the controller drives.
    #[serde(default)]
    pub actuated_tendon: usize,
    /// Tension saturation (N).
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Lower bound on |b_c|.
    #[serde(default = "default_b_min")]
    pub b_min: f64,
    pub scenario: Scenario,
    #[serde(default)]
    pub reference: ReferenceTrajectory,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Keep every rod centerline in the trace.
    #[serde(default)]
    pub store_shapes: bool,
}

fn default_dt() -> f64 {
    0.01
}
fn default_alpha() -> f64 {
    -0.2
}
fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}
fn default_b_min() -> f64 {
    B_C_FLOOR
}
fn default_horizon() -> usize {
    100
}

impl ClosedLoopSetup {
    pub fn new(controller: Controller, scenario: Scenario) -> Self {
        ClosedLoopSetup {
            rod: RodParams::default(),
            tendons: TendonLayout::default(),
            dt: default_dt(),
            alpha: default_alpha(),
            shooting: ShootingConfig::default(),
            controller,
            actuated_tendon: 0,
            t_max: default_t_max(),
            b_min: default_b_min(),
            scenario,
            reference: ReferenceTrajectory::default(),
            horizon: default_horizon(),
            store_shapes: false,
        }
    }

    /// Every violated invariant, prefixed with its key path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut section = |prefix: &str, items: Vec<String>| {
            out.extend(items.into_iter().map(|m| format!("{prefix}.{m}")));
        };
        section("rod", self.rod.violations());
        section("tendons", self.tendons.violations());
        section("shooting", self.shooting.violations());
        section("controller", self.controller.violations());
        section("scenario", self.scenario.violations());
        section("reference", self.reference.violations());
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive (got {})", self.dt));
        }
        if !(self.alpha > -0.5 && self.alpha <= 0.0) {
            out.push(format!("alpha must lie in (-0.5, 0] (got {})", self.alpha));
        }
        if self.actuated_tendon >= self.tendons.len() {
            out.push(format!(
                "actuated_tendon {} is out of range for {} tendons",
                self.actuated_tendon,
                self.tendons.len()
            ));
        }
        if !(self.t_max > 0.0) {
            out.push(format!("t_max must be positive (got {})", self.t_max));
        }
        if !(self.b_min >= 0.0) {
            out.push(format!("b_min must be non-negative (got {})", self.b_min));
        }
        if self.horizon < 1 {
            out.push("horizon must be at least 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }
}

/// One control iteration, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based control iteration.
    pub iteration: usize,
    pub t: f64,
    pub tip: Vec3,
    /// Tension applied to the actuated tendon during this iteration (N).
    pub tension: f64,
    pub clamped: bool,
    /// Actuated-tendon displacement after the step (m).
    pub displacement: f64,
    /// `x_d − x` after the step (m).
    pub error: f64,
    /// Lyapunov candidates at the start of the iteration.
    pub lyapunov: LyapunovValues,
    pub shooting: ShootingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub controller: Controller,
    pub initial_tip: Vec3,
    pub records: Vec<TraceRecord>,
    /// Rod centerlines: the initial one followed by one per record.
    pub shapes: Option<Vec<Vec<Vec3>>>,
}

impl SimTrace {
    /// Lyapunov value of the controller that produced the trace.
    pub fn lyapunov_of(&self, record: &TraceRecord) -> f64 {
        match self.controller {
            Controller::SlidingMode(_) => record.lyapunov.sliding,
            _ => record.lyapunov.backstepping,
        }
    }
}

fn control_gains(controller: &Controller) -> (BacksteppingGains, SmcGains) {
    match controller {
        Controller::Backstepping(g) => (*g, SmcGains::default()),
        Controller::SlidingMode(g) => (BacksteppingGains::default(), *g),
        Controller::Constant { .. } => (BacksteppingGains::default(), SmcGains::default()),
    }
}

/// Runs the controller against the rod simulation for `setup.horizon`
/// iterations.
pub fn run_closed_loop(setup: &ClosedLoopSetup) -> Result<SimTrace> {
    setup.validate()?;
    let rod = Rod::new(setup.rod.clone(), setup.tendons.clone())?;
    let gravity = rod.params.gravity();
    let coeffs = BdfCoeffs::new(setup.dt, setup.alpha)?;
    let idle = vec![0.0; rod.layout.len()];
    let mut sim = Simulation::new(
        rod,
        coeffs,
        setup.shooting.clone(),
        &idle,
        &setup.scenario.tip_force(0, &gravity),
    )?;
    let (bs_gains, smc_gains) = control_gains(&setup.controller);
    let actuated = setup.actuated_tendon;
    let initial_tip = sim.current().tip().p;
    let mut shapes = setup.store_shapes.then(|| vec![sim.current().centerline()]);
    let mut records = Vec::with_capacity(setup.horizon);

    for k in 0..setup.horizon {
        let wrap = |e: Error| Error::AtIteration {
            iteration: k + 1,
            source: Box::new(e),
        };
        let reference = setup.reference.reference(sim.time());
        let requested = match setup.controller {
            Controller::Constant { tension } => (tension, None),
            ref c => {
                let plant =
                    plant_terms(sim.current(), sim.rod(), actuated, setup.b_min).map_err(wrap)?;
                let u = match c {
                    Controller::Backstepping(g) => backstepping_control(&plant, &reference, g),
                    Controller::SlidingMode(g) => smc_control(&plant, &reference, g),
                    Controller::Constant { .. } => unreachable!(),
                };
                (
                    u,
                    Some(lyapunov_values(&plant, &reference, &bs_gains, &smc_gains)),
                )
            }
        };
        let (u, lyapunov) = requested;
        let lyapunov = lyapunov.unwrap_or_else(|| {
            // Open loop: only the tip kinematics enter the candidates.
            let tip = sim.current().tip();
            let plant = PlantTerms {
                a_c: 0.0,
                b_c: 1.0,
                x1: tip.p.x,
                x2: (tip.r.matrix() * tip.q).x,
            };
            lyapunov_values(&plant, &reference, &bs_gains, &smc_gains)
        });
        let (tension, clamped) = clamp_tension(u, setup.t_max);
        let mut tensions = idle.clone();
        tensions[actuated] = tension;

        let force = setup.scenario.tip_force(k, &gravity);
        let step = sim.dynamic_step(&tensions, &force).map_err(wrap)?;
        let current = sim.current();
        let displacement =
            tendon_displacements(current, &sim.rod().layout, sim.rod().params.length)[actuated];
        let target = setup.reference.reference(step.time).x;
        records.push(TraceRecord {
            iteration: k + 1,
            t: step.time,
            tip: step.tip,
            tension,
            clamped,
            displacement,
            error: target - step.tip.x,
            lyapunov,
            shooting: step.report,
        });
        if let Some(s) = shapes.as_mut() {
            s.push(current.centerline());
        }
    }

    Ok(SimTrace {
        controller: setup.controller,
        initial_tip,
        records,
        shapes,
    })
}

/// Tracking metrics of a run, in mm and iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Total path length of the tip (mm).
    pub tpl_mm: f64,
    /// Iteration after which the tip stays within 5 % of the target.
    pub settling_iterations: usize,
    pub overshoot_percent: f64,
    /// Iterations from the first non-negative x to 90 % of the target.
    pub rise_iterations: usize,
    /// |mean error| over the last 10 iterations (mm).
    pub steady_state_error_mm: f64,
}

/// Computes the tracking metrics against a target position (mm).
pub fn compute_metrics(trace: &SimTrace, target_mm: f64) -> Result<MetricsReport> {
    let records = &trace.records;
    if records.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "metrics need at least 10 iterations, trace has {}",
            records.len()
        )));
    }
    let x_mm: Vec<f64> = records.iter().map(|r| r.tip.x * 1e3).collect();
    let tpl_mm = records
        .windows(2)
        .map(|w| (w[1].tip - w[0].tip).norm() * 1e3)
        .sum();

    let band = 0.05 * target_mm.abs();
    let settled_from = x_mm
        .iter()
        .rposition(|x| (x - target_mm).abs() > band)
        .map_or(0, |last_outside| last_outside + 1);
    let settling_iterations = if settled_from < records.len() {
        records[settled_from].iteration
    } else {
        records.len()
    };

    let peak = x_mm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let overshoot_percent = ((peak - target_mm) / target_mm).max(0.0) * 100.0;

    let first = |pred: &dyn Fn(f64) -> bool| {
        x_mm.iter()
            .position(|x| pred(*x))
            .map(|i| records[i].iteration)
    };
    let rise_iterations = match (first(&|x| x >= 0.0), first(&|x| x >= 0.9 * target_mm)) {
        (Some(start), Some(end)) => end.saturating_sub(start),
        _ => records.len(),
    };

    let tail = &records[records.len() - 10..];
    let steady_state_error_mm =
        (tail.iter().map(|r| r.error).sum::<f64>() / tail.len() as f64).abs() * 1e3;

    Ok(MetricsReport {
        tpl_mm,
        settling_iterations: settling_iterations.max(rise_iterations),
        overshoot_percent,
        rise_iterations,
        steady_state_error_mm,
    })
}
