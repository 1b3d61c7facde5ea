use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{expm_real, so3_axes, Algebra, GroupElement};

/// |θ_y| this close to π/2 is treated as gimbal lock.
pub const GIMBAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerProfiles {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Grid points resolved by the gimbal-lock tie-break.
    pub gimbal_lock: Vec<usize>,
}

/// Angles (θ_x, θ_y, θ_z) with R = exp(θ_xΩ_x) exp(θ_yΩ_y) exp(θ_zΩ_z), and a
/// gimbal-lock flag. At gimbal lock θ_z = 0.
pub fn euler_xyz(r: &DMatrix<f64>) -> ([f64; 3], bool) {
    let s = r[(0, 2)].clamp(-1.0, 1.0);
    let b = s.asin();
    if (b.abs() - std::f64::consts::FRAC_PI_2).abs() < GIMBAL_TOL {
        let a = r[(2, 1)].atan2(r[(1, 1)]);
        return ([a, b, 0.0], true);
    }
    let a = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let c = (-r[(0, 1)]).atan2(r[(0, 0)]);
    ([a, b, c], false)
}

pub fn euler_compose(angles: [f64; 3]) -> DMatrix<f64> {
    let axes = so3_axes();
    let mut r = DMatrix::<f64>::identity(3, 3);
    for (axis, a) in axes.iter().zip(angles) {
        r *= expm_real(&(axis.matrix.map(|z| z.re) * a));
    }
    r
}

pub fn euler_decompose(targets: &[GroupElement]) -> Result<EulerProfiles> {
    let mut out = EulerProfiles { x: vec![], y: vec![], z: vec![], gimbal_lock: vec![] };
    for (i, t) in targets.iter().enumerate() {
        if t.group != Algebra::So(3) {
            return Err(Error::Spec(format!("target {i} is not in SO(3)")));
        }
        if t.invariant_residual() > 1e-9 {
            return Err(Error::Numeric(format!("target {i} is not a rotation (residual {:.2e})", t.invariant_residual())));
        }
        let ([a, b, c], lock) = euler_xyz(&t.real_part());
        out.x.push(a);
        out.y.push(b);
        out.z.push(c);
        if lock {
            out.gimbal_lock.push(i);
        }
    }
    Ok(out)
}
