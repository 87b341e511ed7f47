//! Rod parameters, tendon layout, per-node state and the linear-elastic
//! constitutive law with viscous material damping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Rotation, Vec3};

/// Density that lumps spacer disks, glue and markers into the backbone.
pub const ADJUSTED_DENSITY: f64 = 17_189.0;
/// Datasheet density of 304 stainless steel.
pub const DATASHEET_DENSITY: f64 = 6_366.0;

/// Material, geometric and damping constants of the backbone.
///
/// Damping and drag matrices are diagonal and stored as their diagonals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RodParams {
    /// Backbone length L (m).
    pub length: f64,
    /// Backbone radius (m).
    pub radius: f64,
    /// Density ρ (kg/m³).
    pub density: f64,
    /// Young's modulus E (Pa).
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Gravity in the global frame (m/s²).
    pub gravity: [f64; 3],
    /// Shear/extension damping B_se diagonal (N·s).
    pub damping_se: [f64; 3],
    /// Bending/torsion damping B_bt diagonal (N·m²·s).
    pub damping_bt: [f64; 3],
    /// Square-law drag C diagonal (kg/m²).
    pub drag: [f64; 3],
    /// Number of arc-length nodes, both ends included.
    pub nodes: usize,
    /// Reference shear/extension strain v*.
    pub v_ref: [f64; 3],
    /// Reference curvature u* (1/m).
    pub u_ref: [f64; 3],
}

impl Default for RodParams {
    fn default() -> Self {
        RodParams {
            length: 0.5,
            radius: 1e-3,
            density: ADJUSTED_DENSITY,
            youngs_modulus: 190e9,
            poisson_ratio: 0.3,
            gravity: [-9.81, 0.0, 0.0],
            damping_se: [0.0; 3],
            damping_bt: [0.008; 3],
            drag: [0.1; 3],
            nodes: 200,
            v_ref: [0.0, 0.0, 1.0],
            u_ref: [0.0; 3],
        }
    }
}

impl RodParams {
    /// Datasheet variant of the default rod (unadjusted density).
    pub fn datasheet() -> Self {
        RodParams {
            density: DATASHEET_DENSITY,
            ..Default::default()
        }
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }
    pub fn b_se(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.damping_se))
    }
    pub fn b_bt(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.damping_bt))
    }
    pub fn drag(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.drag))
    }
    pub fn v_ref(&self) -> Vec3 {
        Vec3::from(self.v_ref)
    }
    pub fn u_ref(&self) -> Vec3 {
        Vec3::from(self.u_ref)
    }

    /// Node spacing ds = L / (N − 1).
    pub fn ds(&self) -> f64 {
        self.length / (self.nodes as f64 - 1.0)
    }

    /// Lists every violated invariant, keyed by field name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                out.push(format!("{name} must be positive and finite (got {x})"));
            }
        };
        positive("length", self.length);
        positive("radius", self.radius);
        positive("density", self.density);
        positive("youngs_modulus", self.youngs_modulus);
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            out.push(format!(
                "poisson_ratio must lie in [0, 0.5) (got {})",
                self.poisson_ratio
            ));
        }
        if self.nodes < 3 {
            out.push(format!("nodes must be at least 3 (got {})", self.nodes));
        }
        for (name, diag) in [
            ("damping_se", self.damping_se),
            ("damping_bt", self.damping_bt),
            ("drag", self.drag),
        ] {
            if diag.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                out.push(format!(
                    "{name} entries must be non-negative (got {diag:?})"
                ));
            }
        }
        for (name, v) in [
            ("gravity", self.gravity),
            ("v_ref", self.v_ref),
            ("u_ref", self.u_ref),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                out.push(format!("{name} must be finite (got {v:?})"));
            }
        }
        if !(self.v_ref[2] > 0.0) {
            out.push(format!("v_ref[2] must be positive (got {})", self.v_ref[2]));
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

/// One tendon routed parallel to the backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tendon {
    /// Offset r_i in the cross-section frame (m).
    pub offset: [f64; 3],
    /// dr_i/ds.
    #[serde(default)]
    pub offset_rate: [f64; 3],
    /// d²r_i/ds².
    #[serde(default)]
    pub offset_accel: [f64; 3],
}

impl Tendon {
    pub fn straight(offset: Vec3) -> Self {
        Tendon {
            offset: offset.into(),
            offset_rate: [0.0; 3],
            offset_accel: [0.0; 3],
        }
    }
    pub fn r(&self) -> Vec3 {
        Vec3::from(self.offset)
    }
    pub fn r_s(&self) -> Vec3 {
        Vec3::from(self.offset_rate)
    }
    pub fn r_ss(&self) -> Vec3 {
        Vec3::from(self.offset_accel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonLayout {
    pub tendons: Vec<Tendon>,
}

impl TendonLayout {
    /// `count` tendons at equal angular spacing, the first on the +x axis.
    pub fn ring(count: usize, offset: f64) -> Self {
        let tendons = (0..count)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / count as f64;
                // Snap to the axes so the four-tendon layout is exact.
                let (s, c) = angle.sin_cos();
                let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
                Tendon::straight(Vec3::new(snap(c) * offset, snap(s) * offset, 0.0))
            })
            .collect();
        TendonLayout { tendons }
    }

    pub fn len(&self) -> usize {
        self.tendons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tendons.is_empty()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.tendons.is_empty() {
            out.push("tendons must not be empty".to_string());
        }
        for (i, t) in self.tendons.iter().enumerate() {
            let r = t.r();
            if !(r.norm() > 0.0) || !r.iter().all(|x| x.is_finite()) {
                out.push(format!("tendons[{i}].offset must be non-zero and finite"));
            }
            if r.z != 0.0 {
                out.push(format!(
                    "tendons[{i}].offset must lie in the cross-section (z = {})",
                    r.z
                ));
            }
        }
        out
    }
}

impl Default for TendonLayout {
    fn default() -> Self {
        TendonLayout::ring(4, 0.02)
    }
}

/// Cross-section state at one arc-length node.
///
/// `p`, `n`, `m` are global; `q`, `omega`, `v`, `u` are body-frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub p: Vec3,
    pub r: Rotation,
    pub n: Vec3,
    pub m: Vec3,
    pub q: Vec3,
    pub omega: Vec3,
    pub v: Vec3,
    pub u: Vec3,
}

impl NodeState {
    /// Unstressed straight node at arc length `s` along +z.
    pub fn straight(s: f64) -> Self {
        NodeState {
            p: Vec3::new(0.0, 0.0, s),
            r: Rotation::identity(),
            n: Vec3::zeros(),
            m: Vec3::zeros(),
            q: Vec3::zeros(),
            omega: Vec3::zeros(),
            v: Vec3::z(),
            u: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.p, self.n, self.m, self.q, self.omega, self.v, self.u]
            .iter()
            .all(|x| x.iter().all(|c| c.is_finite()))
            && self.r.matrix().iter().all(|c| c.is_finite())
    }
}

/// Section properties and stiffness matrices derived from [`RodParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessSet {
    pub k_se: Mat3,
    pub k_bt: Mat3,
    /// Cross-section area (m²).
    pub area: f64,
    /// Second moment of area (m⁴).
    pub second_moment: f64,
    /// Rotational inertia matrix per unit density (m⁴).
    pub inertia: Mat3,
}

/// Classical circular-section rod stiffness.
pub fn build_stiffness(params: &RodParams) -> StiffnessSet {
    let r = params.radius;
    let area = PI * r * r;
    let second_moment = PI * r.powi(4) / 4.0;
    let e = params.youngs_modulus;
    let g = e / (2.0 * (1.0 + params.poisson_ratio));
    StiffnessSet {
        k_se: Mat3::from_diagonal(&Vec3::new(g * area, g * area, e * area)),
        k_bt: Mat3::from_diagonal(&Vec3::new(
            e * second_moment,
            e * second_moment,
            2.0 * g * second_moment,
        )),
        area,
        second_moment,
        inertia: Mat3::from_diagonal(&Vec3::new(
            second_moment,
            second_moment,
            2.0 * second_moment,
        )),
    }
}

/// Body-frame internal force and moment from strains and their time rates.
pub fn constitutive(
    v: &Vec3,
    u: &Vec3,
    v_t: &Vec3,
    u_t: &Vec3,
    stiff: &StiffnessSet,
    params: &RodParams,
) -> (Vec3, Vec3) {
    let n = stiff.k_se * (v - params.v_ref()) + params.b_se() * v_t;
    let m = stiff.k_bt * (u - params.u_ref()) + params.b_bt() * u_t;
    (n, m)
}

/// Rod and tendon layout used for the simulations: adjusted density,
/// N = 200, four tendons at 2 cm offset spaced 90° apart.
pub fn default_paper_rod() -> (RodParams, TendonLayout) {
    (RodParams::default(), TendonLayout::default())
}
