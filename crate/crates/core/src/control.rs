//! Tip-position controllers for planar motion along the global x axis.
//!
//! Both laws act on the double-integrator model `ẋ₁ = x₂`,
//! `ẋ₂ = a_c + b_c U`, where `x₁` is the tip x-coordinate, `U` the tension
//! of the actuated tendon, and `a_c`, `b_c` are read off the distributed
//! loads at the last node of the converged rod.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Rod, RodTrajectoryStep};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rod::TendonLayout;
use crate::tendon::alpha_matrix;

/// Default lower bound on |b_c|.
pub const B_C_FLOOR: f64 = 1e-8;

/// Default tension saturation (N).
pub const DEFAULT_T_MAX: f64 = 50.0;

#[inline]
fn axis() -> Vec3 {
    Vec3::x()
}

/// Scalar plant model along the control axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantTerms {
    /// Drift acceleration (m/s²).
    pub a_c: f64,
    /// Input gain (m/s² per N).
    pub b_c: f64,
    /// Tip position (m).
    pub x1: f64,
    /// Tip velocity (m/s).
    pub x2: f64,
}

/// Desired position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RefPoint {
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// Extracts `a_c`, `b_c`, tip position and velocity from a converged step.
///
/// `a_c = x̂·(n_s + f_e)/(ρA)` and `b_c = x̂·(−R α e_i)/(ρA)` at the free
/// end, for the actuated tendon `i`.
pub fn plant_terms(
    step: &RodTrajectoryStep,
    rod: &Rod,
    tendon: usize,
    b_min: f64,
) -> Result<PlantTerms> {
    if tendon >= rod.layout.len() {
        return Err(Error::InvalidArgument(format!(
            "actuated tendon {tendon} out of range for {} tendons",
            rod.layout.len()
        )));
    }
    let last = step.nodes.len() - 1;
    let tip = &step.nodes[last];
    let r = tip.r.matrix();
    let rho_a = rod.rho_a();
    let alpha = alpha_matrix(tip, &rod.layout, &step.u_s[last], &step.v_s[last])?;
    let b_c = axis().dot(&(r * (-alpha.column(tendon).into_owned()))) / rho_a;
    if !(b_c.abs() > b_min) {
        return Err(Error::Uncontrollable { b_c, floor: b_min });
    }
    Ok(PlantTerms {
        a_c: axis().dot(&(step.end.n_s + step.end.f_ext)) / rho_a,
        b_c,
        x1: axis().dot(&tip.p),
        x2: axis().dot(&(r * tip.q)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcGains {
    /// Sliding surface slope (1/s).
    pub c: f64,
    /// Proportional reaching rate (1/s).
    pub k: f64,
    /// Switching gain (m/s²).
    pub epsilon: f64,
}

impl Default for SmcGains {
    fn default() -> Self {
        SmcGains {
            c: 2100.0,
            k: 12.0,
            epsilon: 0.005,
        }
    }
}

impl SmcGains {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.c > 0.0) {
            out.push(format!("c must be positive (got {})", self.c));
        }
        if !(self.k > 0.0) {
            out.push(format!("k must be positive (got {})", self.k));
        }
        if !(self.epsilon >= 0.0) {
            out.push(format!(
                "epsilon must be non-negative (got {})",
                self.epsilon
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacksteppingGains {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for BacksteppingGains {
    fn default() -> Self {
        BacksteppingGains {
            alpha1: 1500.0,
            alpha2: 12.5,
        }
    }
}

impl BacksteppingGains {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha1 > 0.0) {
            out.push(format!("alpha1 must be positive (got {})", self.alpha1));
        }
        if !(self.alpha2 > 0.0) {
            out.push(format!("alpha2 must be positive (got {})", self.alpha2));
        }
        out
    }
}

/// Sign function with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sliding surface `S = ė + c e`.
pub fn sliding_surface(plant: &PlantTerms, reference: &RefPoint, gains: &SmcGains) -> f64 {
    let e = reference.x - plant.x1;
    let e_dot = reference.v - plant.x2;
    e_dot + gains.c * e
}

/// Sliding mode law with the exponential reaching law
/// `Ṡ = −ε sgn(S) − k S`.
pub fn smc_control(plant: &PlantTerms, reference: &RefPoint, gains: &SmcGains) -> f64 {
    let e_dot = reference.v - plant.x2;
    let s = sliding_surface(plant, reference, gains);
    (gains.c * e_dot + reference.a - plant.a_c + gains.epsilon * sgn(s) + gains.k * s) / plant.b_c
}

/// Backstepping errors `(z₁, z₂)`.
pub fn backstepping_errors(
    plant: &PlantTerms,
    reference: &RefPoint,
    gains: &BacksteppingGains,
) -> (f64, f64) {
    let z1 = reference.x - plant.x1;
    let z2 = plant.x2 - reference.v - gains.alpha1 * z1;
    (z1, z2)
}

/// Backstepping law making `V̇ = −α₁z₁² − α₂z₂²` on the model.
pub fn backstepping_control(
    plant: &PlantTerms,
    reference: &RefPoint,
    gains: &BacksteppingGains,
) -> f64 {
    let (z1, z2) = backstepping_errors(plant, reference, gains);
    let a1 = gains.alpha1;
    (-plant.a_c + z1 - a1 * z2 - a1 * a1 * z1 - gains.alpha2 * z2 + reference.a) / plant.b_c
}

/// Lyapunov candidates of both controllers at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovValues {
    /// ½(z₁² + z₂²).
    pub backstepping: f64,
    /// ½S².
    pub sliding: f64,
}

pub fn lyapunov_values(
    plant: &PlantTerms,
    reference: &RefPoint,
    backstepping: &BacksteppingGains,
    sliding: &SmcGains,
) -> LyapunovValues {
    let (z1, z2) = backstepping_errors(plant, reference, backstepping);
    let s = sliding_surface(plant, reference, sliding);
    LyapunovValues {
        backstepping: 0.5 * (z1 * z1 + z2 * z2),
        sliding: 0.5 * s * s,
    }
}

/// Tensions sent to the robot and the resulting tendon displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Per-tendon tension (N).
    pub tensions: Vec<f64>,
    /// Per-tendon displacement (m), positive when the tendon is pulled in.
    pub displacements: Vec<f64>,
    /// The requested tension was outside `[0, T_max]`.
    pub clamped: bool,
}

/// Saturates a requested tension to `[0, t_max]`.
pub fn clamp_tension(u: f64, t_max: f64) -> (f64, bool) {
    if u.is_nan() {
        return (0.0, true);
    }
    let t = u.clamp(0.0, t_max);
    (t, t != u)
}

/// Shortening of each tendon path relative to the straight rod:
/// `L − ∫ ‖û r_i + ṙ_i + v‖ ds`, by the trapezoidal rule over the nodes.
pub fn tendon_displacements(
    step: &RodTrajectoryStep,
    layout: &TendonLayout,
    length: f64,
) -> Vec<f64> {
    let ds = length / (step.nodes.len() as f64 - 1.0);
    layout
        .tendons
        .iter()
        .map(|t| {
            let speeds: Vec<f64> = step
                .nodes
                .iter()
                .map(|n| (n.u.cross(&t.r()) + t.r_s() + n.v).norm())
                .collect();
            let interior: f64 = speeds[1..speeds.len() - 1].iter().sum();
            let path = ds * (0.5 * (speeds[0] + speeds[speeds.len() - 1]) + interior);
            length - path
        })
        .collect()
}

/// Clamps `u` onto the actuated tendon, leaves the others slack, and
/// reports tendon displacements of `step`.
pub fn clamp_and_convert(
    u: f64,
    step: &RodTrajectoryStep,
    rod: &Rod,
    actuated: usize,
    t_max: f64,
) -> ControlCommand {
    let (t, clamped) = clamp_tension(u, t_max);
    let mut tensions = vec![0.0; rod.layout.len()];
    tensions[actuated] = t;
    ControlCommand {
        tensions,
        displacements: tendon_displacements(step, &rod.layout, rod.params.length),
        clamped,
    }
}
