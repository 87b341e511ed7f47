//! Distributed tendon loads on the backbone and the free-end tendon
//! termination loads.
//!
//! Each tendon runs parallel to the backbone at a fixed offset `r_i` in the
//! cross-section frame. Its body-frame path tangent is
//! `p_is = û r_i + ṙ_i + v`; the load blocks below couple the unknown strain
//! derivatives `(v_s, u_s)` into the force and moment balance.

use nalgebra::Matrix3xX;

use crate::error::{Error, Result};
use crate::math::{hat, Mat3, Vec3};
use crate::rod::{NodeState, TendonLayout};

/// Tangents shorter than this are treated as degenerate.
pub const MIN_TANGENT: f64 = 1e-9;

/// Body-frame tendon load coefficients at one node.
///
/// The distributed tendon force is `R (a + A v_s + G u_s)` and the moment is
/// `R (b + B v_s + H u_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TendonLoadSet {
    pub a_mat: Mat3,
    pub b_mat: Mat3,
    pub g_mat: Mat3,
    pub h_mat: Mat3,
    pub a: Vec3,
    pub b: Vec3,
    /// Body-frame path tangent of each tendon.
    pub p_is_body: Vec<Vec3>,
}

impl TendonLoadSet {
    pub fn zero(count: usize) -> Self {
        TendonLoadSet {
            a_mat: Mat3::zeros(),
            b_mat: Mat3::zeros(),
            g_mat: Mat3::zeros(),
            h_mat: Mat3::zeros(),
            a: Vec3::zeros(),
            b: Vec3::zeros(),
            p_is_body: vec![Vec3::zeros(); count],
        }
    }

    /// Body-frame distributed force for given strain derivatives.
    pub fn force(&self, v_s: &Vec3, u_s: &Vec3) -> Vec3 {
        self.a + self.a_mat * v_s + self.g_mat * u_s
    }

    /// Body-frame distributed moment for given strain derivatives.
    pub fn moment(&self, v_s: &Vec3, u_s: &Vec3) -> Vec3 {
        self.b + self.b_mat * v_s + self.h_mat * u_s
    }
}

pub(crate) fn check_tensions(tensions: &[f64], layout: &TendonLayout) -> Result<()> {
    if tensions.len() != layout.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} tendon tensions, got {}",
            layout.len(),
            tensions.len()
        )));
    }
    if let Some((i, t)) = tensions
        .iter()
        .enumerate()
        .find(|(_, t)| !(**t >= 0.0 && t.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "tension {i} must be non-negative and finite (got {t})"
        )));
    }
    Ok(())
}

fn tangent(u_hat: &Mat3, v: &Vec3, r: &Vec3, r_s: &Vec3, tendon: usize) -> Result<Vec3> {
    let p = u_hat * r + r_s + v;
    if !(p.norm() > MIN_TANGENT) {
        return Err(Error::SingularTendonPath { tendon, node: None });
    }
    Ok(p)
}

/// Assembles the tendon load blocks at a node from its strains `v`, `u`.
pub fn assemble(
    state: &NodeState,
    tensions: &[f64],
    layout: &TendonLayout,
) -> Result<TendonLoadSet> {
    check_tensions(tensions, layout)?;
    let u_hat = hat(&state.u);
    let mut out = TendonLoadSet::zero(layout.len());
    for (i, (tendon, &t)) in layout.tendons.iter().zip(tensions).enumerate() {
        let r = tendon.r();
        let p = tangent(&u_hat, &state.v, &r, &tendon.r_s(), i)?;
        out.p_is_body[i] = p;
        if t == 0.0 {
            continue;
        }
        let p_hat = hat(&p);
        let norm = p.norm();
        let a_i = -t * (p_hat * p_hat) / (norm * norm * norm);
        let r_hat = hat(&r);
        let b_i = r_hat * a_i;
        let a_vec = a_i * (u_hat * p + u_hat * tendon.r_s() + tendon.r_ss());
        out.a_mat += a_i;
        out.b_mat += b_i;
        out.g_mat -= a_i * r_hat;
        out.h_mat -= b_i * r_hat;
        out.a += a_vec;
        out.b += r_hat * a_vec;
    }
    Ok(out)
}

/// Tendon coupling matrix: column `i` is the body-frame distributed force per
/// unit tension of tendon `i`, negated, so that `f_tendon = −α T`.
///
/// `u_s`, `v_s` are the arc-length derivatives of the strains at the node.
pub fn alpha_matrix(
    state: &NodeState,
    layout: &TendonLayout,
    u_s: &Vec3,
    v_s: &Vec3,
) -> Result<Matrix3xX<f64>> {
    let u_hat = hat(&state.u);
    let u_s_hat = hat(u_s);
    let mut alpha = Matrix3xX::zeros(layout.len());
    for (i, tendon) in layout.tendons.iter().enumerate() {
        let r = tendon.r();
        let p = tangent(&u_hat, &state.v, &r, &tendon.r_s(), i)?;
        let p_ss = u_hat * p + u_s_hat * r + u_hat * tendon.r_s() + tendon.r_ss() + v_s;
        let p_hat = hat(&p);
        let norm = p.norm();
        alpha.set_column(i, &((p_hat * p_hat) * p_ss / (norm * norm * norm)));
    }
    Ok(alpha)
}

/// Internal force and moment required at the free end (global frame).
///
/// Every tendon terminates at the tip and pulls it back along its path
/// tangent; the resulting point force acts at `R r_i` from the centerline.
/// `tip_force` is an external point force at the centerline.
pub fn free_end_bc(
    tip: &NodeState,
    tensions: &[f64],
    layout: &TendonLayout,
    tip_force: &Vec3,
) -> Result<(Vec3, Vec3)> {
    check_tensions(tensions, layout)?;
    let rot = tip.r.matrix();
    let u_hat = hat(&tip.u);
    let mut n = *tip_force;
    let mut m = Vec3::zeros();
    for (i, (tendon, &t)) in layout.tendons.iter().zip(tensions).enumerate() {
        let p = tangent(&u_hat, &tip.v, &tendon.r(), &tendon.r_s(), i)?;
        let force = -t * (rot * p) / p.norm();
        n += force;
        m += (rot * tendon.r()).cross(&force);
    }
    Ok((n, m))
}
