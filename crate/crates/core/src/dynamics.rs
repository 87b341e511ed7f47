//! Semi-discretized rod dynamics.
//!
//! Time derivatives are replaced by the two-step BDF-α approximation
//! `y_t = c0 y + y_h`, where `y_h` depends only on lagged values. What
//! remains is an ODE in arc length, integrated from the clamped base to the
//! free end with forward Euler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{block6, hat, reorthonormalize, solve6, split6, stack6, Mat3, Rotation, Vec3};
use crate::rod::{build_stiffness, NodeState, RodParams, StiffnessSet, TendonLayout};
use crate::tendon::{assemble, TendonLoadSet};

/// Coefficients of `y_t = c0 y + c1 y⁽ⁱ⁻¹⁾ + c2 y⁽ⁱ⁻²⁾ + d1 y_t⁽ⁱ⁻¹⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdfCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub alpha: f64,
    pub dt: f64,
}

impl BdfCoeffs {
    pub fn new(dt: f64, alpha: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive (got {dt})"
            )));
        }
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must exceed -1 (got {alpha})"
            )));
        }
        Ok(bdf_coeffs(dt, alpha))
    }

    /// All coefficients zero: every time derivative vanishes (statics).
    pub fn statics() -> Self {
        BdfCoeffs {
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
            d1: 0.0,
            alpha: 0.0,
            dt: f64::INFINITY,
        }
    }
}

/// BDF-α coefficients for step `dt` and damping parameter `alpha`.
pub fn bdf_coeffs(dt: f64, alpha: f64) -> BdfCoeffs {
    BdfCoeffs {
        c0: (1.5 + alpha) / (dt * (1.0 + alpha)),
        c1: -2.0 / dt,
        c2: (0.5 + alpha) / (dt * (1.0 + alpha)),
        d1: alpha / (1.0 + alpha),
        alpha,
        dt,
    }
}

/// `c0 y + y_h`.
#[inline]
pub fn implicit_rate(y: &Vec3, y_hist: &Vec3, coeffs: &BdfCoeffs) -> Vec3 {
    coeffs.c0 * y + y_hist
}

/// Two lagged values and one lagged rate of a single quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lagged {
    pub prev: Vec3,
    pub prev2: Vec3,
    pub prev_rate: Vec3,
}

impl Lagged {
    /// Quantity at rest: both lagged values equal `y`, zero rate.
    pub fn at_rest(y: Vec3) -> Self {
        Lagged {
            prev: y,
            prev2: y,
            prev_rate: Vec3::zeros(),
        }
    }

    /// `y_h = c1 y⁽ⁱ⁻¹⁾ + c2 y⁽ⁱ⁻²⁾ + d1 y_t⁽ⁱ⁻¹⁾`.
    #[inline]
    pub fn history_term(&self, c: &BdfCoeffs) -> Vec3 {
        c.c1 * self.prev + c.c2 * self.prev2 + c.d1 * self.prev_rate
    }

    /// Accepts the value of the current step and returns its implicit rate.
    pub fn advance(&mut self, y: Vec3, c: &BdfCoeffs) -> Vec3 {
        let rate = implicit_rate(&y, &self.history_term(c), c);
        self.prev2 = self.prev;
        self.prev = y;
        self.prev_rate = rate;
        rate
    }
}

/// History terms `y_h` for the quantities tracked at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeLags {
    pub v: Vec3,
    pub u: Vec3,
    pub q: Vec3,
    pub omega: Vec3,
    pub v_s: Vec3,
    pub u_s: Vec3,
}

const TRACKED: usize = 6;

fn tracked_values(node: &NodeState, v_s: &Vec3, u_s: &Vec3) -> [Vec3; TRACKED] {
    [node.v, node.u, node.q, node.omega, *v_s, *u_s]
}

/// Per-node lagged values of v, u, q, ω, v_s and u_s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistoryBuffer {
    nodes: Vec<[Lagged; TRACKED]>,
}

impl HistoryBuffer {
    /// Cold start: the rod is assumed to have been at rest in `step`.
    pub fn cold_start(step: &RodTrajectoryStep) -> Self {
        let nodes = step
            .nodes
            .iter()
            .zip(step.v_s.iter().zip(&step.u_s))
            .map(|(n, (v_s, u_s))| tracked_values(n, v_s, u_s).map(Lagged::at_rest))
            .collect();
        HistoryBuffer { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, j: usize) -> &[Lagged; TRACKED] {
        &self.nodes[j]
    }

    /// Evaluates `y_h` at every node for the next step.
    pub fn lags(&self, c: &BdfCoeffs) -> Vec<NodeLags> {
        self.nodes
            .iter()
            .map(|l| NodeLags {
                v: l[0].history_term(c),
                u: l[1].history_term(c),
                q: l[2].history_term(c),
                omega: l[3].history_term(c),
                v_s: l[4].history_term(c),
                u_s: l[5].history_term(c),
            })
            .collect()
    }
}

/// Shifts the history by one step, storing the values of `step` and their
/// implicit rates.
pub fn advance_history(
    step: &RodTrajectoryStep,
    mut buffer: HistoryBuffer,
    coeffs: &BdfCoeffs,
) -> HistoryBuffer {
    for (j, lag) in buffer.nodes.iter_mut().enumerate() {
        let values = tracked_values(&step.nodes[j], &step.v_s[j], &step.u_s[j]);
        for (l, y) in lag.iter_mut().zip(values) {
            l.advance(y, coeffs);
        }
    }
    buffer
}

/// Distributed loads evaluated at the free-end node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EndLoads {
    pub n_s: Vec3,
    /// Gravity and drag (global).
    pub f_ext: Vec3,
    /// Tendon force (global).
    pub f_tendon: Vec3,
}

/// Rod states at every node for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodTrajectoryStep {
    pub nodes: Vec<NodeState>,
    pub v_s: Vec<Vec3>,
    pub u_s: Vec<Vec3>,
    pub end: EndLoads,
    pub time: f64,
}

impl RodTrajectoryStep {
    /// Unloaded straight rod along +z.
    pub fn straight(params: &RodParams) -> Self {
        let ds = params.ds();
        let nodes = (0..params.nodes)
            .map(|j| NodeState::straight(j as f64 * ds))
            .collect();
        RodTrajectoryStep {
            nodes,
            v_s: vec![Vec3::zeros(); params.nodes],
            u_s: vec![Vec3::zeros(); params.nodes],
            end: EndLoads::default(),
            time: 0.0,
        }
    }

    pub fn tip(&self) -> &NodeState {
        self.nodes.last().expect("rod has nodes")
    }

    pub fn centerline(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.p).collect()
    }

    /// Sum of chord lengths between consecutive nodes.
    pub fn arc_length(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| (w[1].p - w[0].p).norm())
            .sum()
    }
}

/// Rod geometry, material and tendon layout, with derived constants.
#[derive(Debug, Clone)]
pub struct Rod {
    pub params: RodParams,
    pub stiffness: StiffnessSet,
    pub layout: TendonLayout,
    /// Project R back onto SO(3) after every Euler step.
    pub reorthonormalize: bool,
    rho_a: f64,
    rho_j: Mat3,
    b_se: Mat3,
    b_bt: Mat3,
    drag: Mat3,
    gravity: Vec3,
    v_ref: Vec3,
    u_ref: Vec3,
}

impl Rod {
    pub fn new(params: RodParams, layout: TendonLayout) -> Result<Self> {
        let mut violations = params.violations();
        violations.extend(layout.violations());
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        let stiffness = build_stiffness(&params);
        Ok(Rod {
            rho_a: params.density * stiffness.area,
            rho_j: stiffness.inertia * params.density,
            b_se: params.b_se(),
            b_bt: params.b_bt(),
            drag: params.drag(),
            gravity: params.gravity(),
            v_ref: params.v_ref(),
            u_ref: params.u_ref(),
            params,
            stiffness,
            layout,
            reorthonormalize: true,
        })
    }

    /// Mass per unit length ρA.
    pub fn rho_a(&self) -> f64 {
        self.rho_a
    }

    /// Distributed gravity and drag, global frame.
    pub fn external_force(&self, r: &Mat3, q: &Vec3) -> Vec3 {
        let q_abs = q.component_mul(&q.abs());
        self.rho_a * self.gravity - r * (self.drag * q_abs)
    }
}

/// Rod plus the matrices that depend on the current BDF coefficients.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub rod: &'a Rod,
    pub coeffs: BdfCoeffs,
    k_se_c: Mat3,
    k_bt_c: Mat3,
    k_se_c_inv: Mat3,
    k_bt_c_inv: Mat3,
}

impl<'a> StepContext<'a> {
    pub fn new(rod: &'a Rod, coeffs: BdfCoeffs) -> Result<Self> {
        let k_se_c = rod.stiffness.k_se + coeffs.c0 * rod.b_se;
        let k_bt_c = rod.stiffness.k_bt + coeffs.c0 * rod.b_bt;
        let singular = || Error::SingularSystem {
            condition: f64::INFINITY,
            node: None,
        };
        Ok(StepContext {
            rod,
            coeffs,
            k_se_c_inv: k_se_c.try_inverse().ok_or_else(singular)?,
            k_bt_c_inv: k_bt_c.try_inverse().ok_or_else(singular)?,
            k_se_c,
            k_bt_c,
        })
    }
}

/// Arc-length derivatives of the propagated state at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialDerivatives {
    pub p_s: Vec3,
    pub r_s: Mat3,
    pub n_s: Vec3,
    pub m_s: Vec3,
    pub q_s: Vec3,
    pub omega_s: Vec3,
    pub v_s: Vec3,
    pub u_s: Vec3,
}

/// Everything evaluated at a node while computing its derivatives.
#[derive(Debug, Clone)]
pub struct NodeSolution {
    /// Strains recovered from the internal loads.
    pub v: Vec3,
    pub u: Vec3,
    pub derivs: SpatialDerivatives,
    /// Distributed gravity and drag (global).
    pub f_ext: Vec3,
    /// Distributed tendon force (global).
    pub f_tendon: Vec3,
    pub loads: TendonLoadSet,
}

/// Right-hand side of the semi-discretized rod equations.
///
/// `node` supplies p, R, n, m, q and ω; its v and u are ignored and
/// recovered from (n, m) through the damped constitutive law.
pub fn spatial_rhs(
    ctx: &StepContext,
    node: &NodeState,
    lags: &NodeLags,
    tensions: &[f64],
) -> Result<NodeSolution> {
    let rod = ctx.rod;
    let r = node.r.matrix();
    let rt = r.transpose();
    let n_body = rt * node.n;
    let m_body = rt * node.m;

    // n_body = K_se (v − v*) + B_se (c0 v + v_h), solved for v; likewise u.
    let v = ctx.k_se_c_inv * (n_body + rod.stiffness.k_se * rod.v_ref - rod.b_se * lags.v);
    let u = ctx.k_bt_c_inv * (m_body + rod.stiffness.k_bt * rod.u_ref - rod.b_bt * lags.u);
    let q_t = implicit_rate(&node.q, &lags.q, &ctx.coeffs);
    let omega_t = implicit_rate(&node.omega, &lags.omega, &ctx.coeffs);
    let v_t = implicit_rate(&v, &lags.v, &ctx.coeffs);
    let u_t = implicit_rate(&u, &lags.u, &ctx.coeffs);

    let strained = NodeState { v, u, ..*node };
    let loads = assemble(&strained, tensions, &rod.layout)?;

    let u_hat = hat(&u);
    let omega_hat = hat(&node.omega);
    let q_abs = node.q.component_mul(&node.q.abs());
    let inertial_lin = rod.rho_a * (omega_hat * node.q + q_t);
    let inertial_ang = omega_hat * (rod.rho_j * node.omega) + rod.rho_j * omega_t;

    let pi_n = inertial_lin - rt * (rod.rho_a * rod.gravity) + rod.drag * q_abs - loads.a;
    let pi_m = inertial_ang - hat(&v) * n_body - loads.b;
    let sigma_n = u_hat * n_body + rod.b_se * lags.v_s;
    let sigma_m = u_hat * m_body + rod.b_bt * lags.u_s;

    let theta = block6(
        &(ctx.k_se_c + loads.a_mat),
        &loads.g_mat,
        &loads.b_mat,
        &(ctx.k_bt_c + loads.h_mat),
    );
    let rhs = stack6(&(pi_n - sigma_n), &(pi_m - sigma_m));
    let (v_s, u_s) = split6(&solve6(&theta, &rhs)?);

    let p_s = r * v;
    let f_ext = rod.external_force(r, &node.q);
    let f_tendon = r * loads.force(&v_s, &u_s);
    let l_tendon = r * loads.moment(&v_s, &u_s);
    let derivs = SpatialDerivatives {
        p_s,
        r_s: r * u_hat,
        n_s: r * inertial_lin - f_tendon - f_ext,
        m_s: r * inertial_ang - p_s.cross(&node.n) - l_tendon,
        q_s: v_t - u_hat * node.q + omega_hat * v,
        omega_s: u_t - u_hat * node.omega,
        v_s,
        u_s,
    };
    Ok(NodeSolution {
        v,
        u,
        derivs,
        f_ext,
        f_tendon,
        loads,
    })
}

/// Integrates from the clamped base with guessed base loads `(n0, m0)` to
/// the free end.
pub fn propagate(
    ctx: &StepContext,
    base: (Vec3, Vec3),
    tensions: &[f64],
    lags: &[NodeLags],
    time: f64,
) -> Result<RodTrajectoryStep> {
    let count = ctx.rod.params.nodes;
    if lags.len() != count {
        return Err(Error::InvalidArgument(format!(
            "history holds {} nodes, rod has {count}",
            lags.len()
        )));
    }
    let ds = ctx.rod.params.ds();
    let mut nodes = Vec::with_capacity(count);
    let mut v_s = Vec::with_capacity(count);
    let mut u_s = Vec::with_capacity(count);
    let mut end = EndLoads::default();

    let mut node = NodeState {
        p: Vec3::zeros(),
        r: Rotation::identity(),
        n: base.0,
        m: base.1,
        q: Vec3::zeros(),
        omega: Vec3::zeros(),
        v: Vec3::zeros(),
        u: Vec3::zeros(),
    };
    for (j, lag) in lags.iter().enumerate() {
        let sol = spatial_rhs(ctx, &node, lag, tensions).map_err(|e| e.at_node(j))?;
        node.v = sol.v;
        node.u = sol.u;
        if !node.is_finite() {
            return Err(Error::Divergence { node: j });
        }
        nodes.push(node);
        v_s.push(sol.derivs.v_s);
        u_s.push(sol.derivs.u_s);
        if j + 1 == count {
            end = EndLoads {
                n_s: sol.derivs.n_s,
                f_ext: sol.f_ext,
                f_tendon: sol.f_tendon,
            };
            break;
        }
        let d = &sol.derivs;
        let r_next = node.r.matrix() + d.r_s * ds;
        let r_next = if ctx.rod.reorthonormalize {
            reorthonormalize(&r_next).map_err(|_| Error::Divergence { node: j + 1 })?
        } else {
            // Drift is left in place so it can be measured.
            Rotation::from_raw(r_next)
        };
        node = NodeState {
            p: node.p + d.p_s * ds,
            r: r_next,
            n: node.n + d.n_s * ds,
            m: node.m + d.m_s * ds,
            q: node.q + d.q_s * ds,
            omega: node.omega + d.omega_s * ds,
            v: Vec3::zeros(),
            u: Vec3::zeros(),
        };
    }
    Ok(RodTrajectoryStep {
        nodes,
        v_s,
        u_s,
        end,
        time,
    })
}
