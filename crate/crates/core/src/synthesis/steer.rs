use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::larc::check_classical;
use crate::lie_core::{expm_real, logm, Algebra, AlgebraElement, GroupElement};
use crate::simulator::{integrate_single, point_error};
use crate::spec::SystemSpec;

use super::schedule::ControlSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringPhase {
    pub schedule: ControlSchedule,
    /// Rotation and translation reached at the end of the phase.
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringPlan {
    pub point: Vec<f64>,
    /// Point of the translation subspace at radius ‖x_F‖.
    pub z: Vec<f64>,
    /// Rotation with x_F = A z.
    pub a: Vec<Vec<f64>>,
    pub phases: [SteeringPhase; 3],
    pub schedule: ControlSchedule,
    pub rotation_error: f64,
    pub translation_error: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn householder(w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    DMatrix::identity(n, n) - (w * w.transpose()) * (2.0 / w.norm_squared())
}

/// Rotation taking the unit vector u to the unit vector v as a product of two
/// reflections.
pub fn rotation_between(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    if (u - v).norm() < 1e-15 {
        return DMatrix::identity(n, n);
    }
    let s = u + v;
    if s.norm() > 1e-8 {
        return householder(v) * householder(&s);
    }
    // v = -u: reflect u to -u, then reflect across a hyperplane containing v
    let k = (0..n).min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs())).expect("n >= 1");
    let mut w = DVector::zeros(n);
    w[k] = 1.0;
    w -= u * u[k];
    householder(&w) * householder(u)
}

/// Pulses realizing a rotation R at a fixed parameter point, using rotation
/// channels that span so(n), or two orthogonal axes of so(3).
fn rotation_schedule(spec: &SystemSpec, point: &[f64], r: &DMatrix<f64>) -> Result<ControlSchedule> {
    let Algebra::Se(n) = spec.algebra else {
        return Err(Error::Spec("three-step steering requires an SE(n) spec".into()));
    };
    let channels = spec.channel_count();
    let mut sched = ControlSchedule::new(channels);
    if (r - DMatrix::<f64>::identity(n, n)).amax() < 1e-15 {
        return Ok(sched);
    }
    let so = Algebra::So(n);
    let rot: Vec<AlgebraElement> = spec
        .rotational_part()?
        .real_channel_matrices(point)
        .iter()
        .map(|m| AlgebraElement::from_real(so, m))
        .collect();
    let full = n * (n - 1) / 2;
    if crate::larc::span_rank(&rot) == full {
        // at the cut locus, R = Q·(QᵀR) with a fixed small rotation Q
        let mut logs = Vec::new();
        match logm(&GroupElement::from_real(so, r)) {
            Ok(l) => logs.push(l),
            Err(Error::CutLocus { .. }) => {
                let mut split = None;
                for b in crate::lie_core::standard_basis(so)? {
                    let step = b.element().scale(0.5);
                    let q = expm_real(&step.matrix.map(|z| z.re));
                    if let Ok(l) = logm(&GroupElement::from_real(so, &(q.transpose() * r))) {
                        split = Some((l, step));
                        break;
                    }
                }
                let (l, step) = split.ok_or_else(|| Error::Numeric("no split avoids the cut locus".into()))?;
                logs.push(l);
                logs.push(step);
            }
            Err(e) => return Err(e),
        }
        for l in &logs {
            let u = solve_span(&rot, l)?;
            let mut full_u = vec![0.0; channels];
            full_u[..u.len()].copy_from_slice(&u);
            sched.push(1.0, full_u);
        }
        return Ok(sched);
    }
    if n == 3 {
        return two_axis_schedule(&rot, r, channels);
    }
    Err(Error::Spec("rotation generators must span so(n) (or two axes of so(3)) for steering".into()))
}

/// Least-squares controls u with Σ u_k G_k = L.
fn solve_span(gens: &[AlgebraElement], l: &AlgebraElement) -> Result<Vec<f64>> {
    let cols: Vec<Vec<f64>> = gens.iter().map(|g| g.flatten()).collect();
    let a = DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i]);
    let b = DVector::from_vec(l.flatten());
    let u = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(u.iter().copied().collect())
}

/// R = exp(αA) exp(βB) exp(γA) for two orthogonal generator axes A, B.
fn two_axis_schedule(rot: &[AlgebraElement], r: &DMatrix<f64>, channels: usize) -> Result<ControlSchedule> {
    let coords: Vec<[f64; 3]> = rot.iter().map(|g| super::plan::axis_coords(&g.matrix)).collect::<Result<_>>()?;
    let norm = |c: &[f64; 3]| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let mut pair = None;
    'outer: for i in 0..rot.len() {
        for j in 0..rot.len() {
            let (a, b) = (coords[i], coords[j]);
            let (na, nb) = (norm(&a), norm(&b));
            if na > 1e-12 && nb > 1e-12 && (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs() < 1e-12 * na * nb {
                pair = Some((i, j, na, nb));
                break 'outer;
            }
        }
    }
    let Some((i, j, na, nb)) = pair else {
        return Err(Error::Spec("rotation generators need two orthogonal axes for steering".into()));
    };
    let a = DVector::from_column_slice(&coords[i]) / na;
    let b = DVector::from_column_slice(&coords[j]) / nb;
    let c = a.cross(&b);
    let q = DMatrix::from_columns(&[a, b, c]);
    // in the frame (a, b, a×b) the axes are e_1, e_2: R' = Rx(α) Ry(β) Rx(γ)
    let rp = q.transpose() * r * &q;
    let beta = rp[(0, 0)].clamp(-1.0, 1.0).acos();
    let (alpha, gamma) = if beta.sin().abs() < 1e-9 {
        (rp[(2, 1)].atan2(rp[(1, 1)]), 0.0)
    } else {
        (rp[(1, 0)].atan2(-rp[(2, 0)]), rp[(0, 1)].atan2(rp[(0, 2)]))
    };
    let mut s = ControlSchedule::new(channels);
    for (k, angle, nk) in [(i, gamma, na), (j, beta, nb), (i, alpha, na)] {
        if angle != 0.0 {
            let mut u = vec![0.0; channels];
            u[k] = angle / nk;
            s.push(1.0, u);
        }
    }
    Ok(s)
}

fn translation_schedule(spec: &SystemSpec, z: &DVector<f64>) -> ControlSchedule {
    let mut s = ControlSchedule::new(spec.channel_count());
    if z.amax() == 0.0 {
        return s;
    }
    let mut u = vec![0.0; spec.channel_count()];
    for (l, &k) in spec.translations.iter().enumerate() {
        if !spec.translations[..l].contains(&k) {
            u[spec.generators.len() + l] = z[k];
        }
    }
    s.push(1.0, u);
    s
}

fn state_at(spec: &SystemSpec, point: &[f64], s: &ControlSchedule) -> Result<GroupElement> {
    Ok(integrate_single(spec, point, s)?.final_state().clone())
}

/// Three-phase steering of one SE(n) system at the box midpoint: rotate to
/// A⁻¹X_F, translate to z inside the translation subspace, then rotate by A.
pub fn three_step_steer_sen(spec: &SystemSpec, x_f: &[f64], r_f: &DMatrix<f64>) -> Result<SteeringPlan> {
    let Algebra::Se(n) = spec.algebra else {
        return Err(Error::Spec("three-step steering requires an SE(n) spec".into()));
    };
    let report = check_classical(spec)?;
    if let Some(o) = report.obstruction {
        return Err(Error::Uncontrollable { obstruction: o.tag().into() });
    }
    if x_f.len() != n || r_f.shape() != (n, n) {
        return Err(Error::Shape(format!("target must be a {n}-vector and an {n}x{n} rotation")));
    }
    let target_rot = GroupElement::from_real(Algebra::So(n), r_f);
    if target_rot.invariant_residual() > 1e-9 {
        return Err(Error::Numeric("target rotation is not in SO(n)".into()));
    }
    let point = spec.nominal_point();
    let xf = DVector::from_column_slice(x_f);
    let radius = xf.norm();
    let mut z = DVector::zeros(n);
    let mut a = DMatrix::identity(n, n);
    if radius > 0.0 {
        for &k in &spec.translations {
            z[k] = xf[k];
        }
        if z.norm() <= 1e-12 * radius {
            z = DVector::zeros(n);
            z[spec.translations[0]] = 1.0;
        }
        z *= radius / z.norm();
        a = rotation_between(&(&z / radius), &(&xf / radius));
    }
    let p1 = rotation_schedule(spec, &point, &(a.transpose() * r_f))?;
    let p2 = translation_schedule(spec, &z);
    let p3 = rotation_schedule(spec, &point, &a)?;
    let s12 = p1.concat(&p2)?;
    let schedule = s12.concat(&p3)?;
    let phase = |s: &ControlSchedule, upto: &ControlSchedule| -> Result<SteeringPhase> {
        let g = state_at(spec, &point, upto)?;
        Ok(SteeringPhase {
            schedule: s.clone(),
            rotation: rows(&g.rotation_block()),
            translation: g.translation().iter().copied().collect(),
        })
    };
    let phases = [phase(&p1, &p1)?, phase(&p2, &s12)?, phase(&p3, &schedule)?];
    let reached = state_at(spec, &point, &schedule)?;
    let mut target = DMatrix::<f64>::identity(n + 1, n + 1);
    target.view_mut((0, 0), (n, n)).copy_from(r_f);
    target.view_mut((0, n), (n, 1)).copy_from(&xf);
    let (rotation_error, translation_error) = point_error(&reached, &GroupElement::from_real(spec.algebra, &target))?;
    Ok(SteeringPlan {
        point,
        z: z.iter().copied().collect(),
        a: rows(&a),
        phases,
        schedule,
        rotation_error,
        translation_error,
    })
}
