//! Exact integration of piecewise-constant bilinear dynamics: each interval
//! multiplies the state on the left by the exponential of the frozen generator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{geodesic_distance, Algebra, CMat, EnsembleState, GroupElement};
use crate::par::{self, Execution};
use crate::spec::SystemSpec;
use crate::synthesis::ControlSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Recording {
    #[default]
    Breakpoints,
    FinalOnly,
    /// Extra samples per interval (in addition to breakpoints).
    Dense(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GroupElement>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GroupElement {
        self.states.last().expect("trajectory holds the initial state")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleTrajectory {
    pub grid: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// states[p][t]: grid point p, recorded time t.
    pub states: Vec<Vec<GroupElement>>,
}

impl EnsembleTrajectory {
    pub fn final_state(&self) -> EnsembleState {
        EnsembleState {
            grid: self.grid.clone(),
            states: self.states.iter().map(|s| s.last().expect("nonempty").clone()).collect(),
        }
    }
}

fn check_schedule(spec: &SystemSpec, schedule: &ControlSchedule) -> Result<()> {
    if schedule.channels != spec.channel_count() {
        return Err(Error::Spec(format!(
            "schedule has {} channels, spec has {}",
            schedule.channels,
            spec.channel_count()
        )));
    }
    schedule.validate()
}

/// Generic interval propagation over a real or complex field.
fn propagate<T>(mats: &[DMatrix<T>], schedule: &ControlSchedule, recording: Recording) -> (Vec<f64>, Vec<DMatrix<T>>)
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let d = mats.first().map(|m| m.nrows()).unwrap_or(0);
    let mut state = DMatrix::<T>::identity(d, d);
    let start = schedule.breakpoints.first().copied().unwrap_or(0.0);
    let mut times = vec![start];
    let mut states = vec![state.clone()];
    for (i, u) in schedule.controls.iter().enumerate() {
        let (t0, t1) = (schedule.breakpoints[i], schedule.breakpoints[i + 1]);
        let dt = t1 - t0;
        let mut a = DMatrix::<T>::zeros(d, d);
        for (m, &uk) in mats.iter().zip(u) {
            if uk != 0.0 {
                a += m * T::from_real(uk * dt);
            }
        }
        if let Recording::Dense(k) = recording {
            if k > 0 {
                let step = (a.clone() * T::from_real(1.0 / (k + 1) as f64)).exp();
                let mut s = state.clone();
                for j in 1..=k {
                    s = &step * s;
                    times.push(t0 + dt * j as f64 / (k + 1) as f64);
                    states.push(s.clone());
                }
            }
        }
        let any = u.iter().any(|&x| x != 0.0);
        if any {
            state = a.exp() * state;
        }
        if recording != Recording::FinalOnly {
            times.push(t1);
            states.push(state.clone());
        }
    }
    if recording == Recording::FinalOnly && !schedule.controls.is_empty() {
        times.push(*schedule.breakpoints.last().expect("breakpoints"));
        states.push(state);
    }
    (times, states)
}

pub fn integrate_single(spec: &SystemSpec, point: &[f64], schedule: &ControlSchedule) -> Result<Trajectory> {
    integrate_single_with(spec, point, schedule, Recording::Breakpoints)
}

pub fn integrate_single_with(
    spec: &SystemSpec,
    point: &[f64],
    schedule: &ControlSchedule,
    recording: Recording,
) -> Result<Trajectory> {
    check_schedule(spec, schedule)?;
    if !spec.in_box(point) {
        return Err(Error::Spec(format!("parameter point {point:?} is outside the box")));
    }
    let group = spec.algebra;
    let (times, states) = match group {
        Algebra::So(_) | Algebra::Se(_) => {
            let mats = spec.real_channel_matrices(point);
            let (t, s) = propagate(&mats, schedule, recording);
            (t, s.iter().map(|m| GroupElement::from_real(group, m)).collect())
        }
        _ => {
            let mats: Vec<CMat> = spec.channel_matrices(point);
            let (t, s) = propagate(&mats, schedule, recording);
            (t, s.into_iter().map(|m| GroupElement { group, matrix: m }).collect())
        }
    };
    Ok(Trajectory { times, states })
}

pub fn integrate_ensemble(spec: &SystemSpec, grid: &[Vec<f64>], schedule: &ControlSchedule) -> Result<EnsembleTrajectory> {
    integrate_ensemble_with(spec, grid, schedule, Recording::Breakpoints, Execution::default())
}

/// Integrates every grid point under the same broadcast schedule.
pub fn integrate_ensemble_with(
    spec: &SystemSpec,
    grid: &[Vec<f64>],
    schedule: &ControlSchedule,
    recording: Recording,
    exec: Execution,
) -> Result<EnsembleTrajectory> {
    check_schedule(spec, schedule)?;
    let runs = par::map(exec, grid, |p| integrate_single_with(spec, p, schedule, recording));
    let mut times = Vec::new();
    let mut states = Vec::with_capacity(grid.len());
    for r in runs {
        let r = r?;
        times = r.times;
        states.push(r.states);
    }
    Ok(EnsembleTrajectory { grid: grid.to_vec(), times, states })
}

/// Final states only, the common case for planning loops.
pub fn final_states(spec: &SystemSpec, grid: &[Vec<f64>], schedule: &ControlSchedule, exec: Execution) -> Result<EnsembleState> {
    Ok(integrate_ensemble_with(spec, grid, schedule, Recording::FinalOnly, exec)?.final_state())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub grid_index: usize,
    pub point: Vec<f64>,
    pub rotation: f64,
    pub translation: f64,
    pub combined: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sup: f64,
    pub argmax: usize,
    pub sup_rotation: f64,
    pub sup_translation: f64,
    pub per_point: Vec<PointError>,
}

/// Pointwise error between two group elements; SE(n) splits rotation and translation.
pub fn point_error(a: &GroupElement, b: &GroupElement) -> Result<(f64, f64)> {
    match a.group {
        Algebra::Se(n) => {
            let so = Algebra::So(n);
            let ra = GroupElement::from_real(so, &a.rotation_block());
            let rb = GroupElement::from_real(so, &b.rotation_block());
            Ok((geodesic_distance(&ra, &rb)?, (a.translation() - b.translation()).norm()))
        }
        _ => Ok((geodesic_distance(a, b)?, 0.0)),
    }
}

/// Sup-metric comparison of the final states against a target.
pub fn evaluate(trajectory: &EnsembleTrajectory, target: &EnsembleState) -> Result<EvaluationReport> {
    evaluate_state(&trajectory.final_state(), target)
}

pub fn evaluate_state(finals: &EnsembleState, target: &EnsembleState) -> Result<EvaluationReport> {
    if finals.grid != target.grid || target.states.len() != target.grid.len() {
        return Err(Error::Grid("trajectory and target grids differ".into()));
    }
    let mut per_point = Vec::with_capacity(finals.grid.len());
    for (i, (a, b)) in finals.states.iter().zip(&target.states).enumerate() {
        let (rotation, translation) = point_error(a, b)?;
        per_point.push(PointError {
            grid_index: i,
            point: finals.grid[i].clone(),
            rotation,
            translation,
            combined: rotation.max(translation),
        });
    }
    let combined: Vec<f64> = per_point.iter().map(|p| p.combined).collect();
    let (argmax, sup) = par::argmax(&combined).unwrap_or((0, 0.0));
    Ok(EvaluationReport {
        sup,
        argmax,
        sup_rotation: per_point.iter().map(|p| p.rotation).fold(0.0, f64::max),
        sup_translation: per_point.iter().map(|p| p.translation).fold(0.0, f64::max),
        per_point,
    })
}

/// Constant ensemble state.
pub fn constant_state(grid: &[Vec<f64>], g: &GroupElement) -> EnsembleState {
    EnsembleState { grid: grid.to_vec(), states: vec![g.clone(); grid.len()] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::{expm, so3_axes, standard_basis, AlgebraElement};
    use crate::spec::rotation_spec;

    #[test]
    fn zero_controls_stay_at_identity() {
        let s = rotation_spec(Algebra::So(3), &[(1, 2, "b")], &[], &[("b", 1.0, 2.0, 2)]).unwrap();
        let mut sched = ControlSchedule::new(1);
        sched.push(1.0, vec![0.0]);
        let t = integrate_ensemble(&s, &s.grid(), &sched).unwrap();
        for p in &t.states {
            assert_eq!(p.last().unwrap().matrix, CMat::identity(3, 3));
        }
    }

    #[test]
    fn single_interval_is_one_exponential() {
        let s = rotation_spec(Algebra::So(2), &[(0, 1, "b")], &[], &[("b", 1.0, 2.0, 2)]).unwrap();
        let mut sched = ControlSchedule::new(1);
        sched.push(0.5, vec![1.0]);
        let t = integrate_single(&s, &[2.0], &sched).unwrap();
        let want = expm(&standard_basis(Algebra::So(2)).unwrap()[0].element()).unwrap();
        assert!((t.final_state().matrix.clone() - want.matrix).camax() < 1e-15);
        assert!(integrate_single(&s, &[3.0], &sched).is_err());
        let bad = ControlSchedule::new(2);
        assert!(integrate_single(&s, &[2.0], &bad).is_err());
    }

    #[test]
    fn per_point_scaling_and_evaluation() {
        // βΩ_x is the (2,3) generator with a minus sign; use O_23 with param b and u = -1
        let s = rotation_spec(Algebra::So(3), &[(1, 2, "b")], &[], &[("b", 1.0, 2.0, 2)]).unwrap();
        let mut sched = ControlSchedule::new(1);
        sched.push(1.0, vec![-1.0]);
        let t = integrate_ensemble(&s, &[vec![1.0], vec![2.0]], &sched).unwrap();
        let [x, _, _] = so3_axes();
        for (p, b) in t.states.iter().zip([1.0, 2.0]) {
            let want = expm(&x.scale(b)).unwrap();
            assert!((p.last().unwrap().matrix.clone() - want.matrix).camax() < 1e-14);
        }
        let target = constant_state(&t.grid, &GroupElement::identity(Algebra::So(3)));
        let r = evaluate(&t, &target).unwrap();
        assert!((r.sup - 2.0).abs() < 1e-12);
        assert_eq!(r.argmax, 1);
        let finals = t.final_state();
        assert_eq!(evaluate(&t, &finals).unwrap().sup, 0.0);
    }

    #[test]
    fn se_joint_form_matches_split_form() {
        let s = rotation_spec(Algebra::Se(2), &[(0, 1, "b")], &[0], &[("b", 1.0, 2.0, 2)]).unwrap();
        let mut sched = ControlSchedule::new(2);
        sched.push(0.7, vec![0.9, 0.0]);
        sched.push(0.4, vec![0.0, 1.3]);
        sched.push(0.5, vec![-0.2, 0.0]);
        let t = integrate_single(&s, &[1.5], &sched).unwrap();
        // split form: rotation R' = ΩR, translation x' = Ωx + v e_1
        let so = standard_basis(Algebra::So(2)).unwrap()[0].element();
        let rot = |th: f64| expm(&so.scale(th)).unwrap().real_part();
        let mut r = DMatrix::<f64>::identity(2, 2);
        let mut x = nalgebra::DVector::<f64>::zeros(2);
        for (dt, u) in [(0.7, [0.9, 0.0]), (0.4, [0.0, 1.3]), (0.5, [-0.2, 0.0])] {
            if u[0] != 0.0 {
                let e = rot(1.5 * u[0] * dt);
                r = &e * r;
                x = &e * x;
            } else {
                x[0] += u[1] * dt;
            }
        }
        let g = t.final_state();
        assert!((g.rotation_block() - r).amax() < 1e-12);
        assert!((g.translation() - x).amax() < 1e-12);
        assert!(g.invariant_residual() < 1e-12);
    }

    #[test]
    fn su2_trajectory_stays_unitary() {
        let basis = standard_basis(Algebra::Su2).unwrap();
        let spec = SystemSpec {
            algebra: Algebra::Su2,
            generators: basis
                .iter()
                .take(2)
                .map(|b| crate::spec::Generator { basis: b.clone(), param: crate::spec::ParamExpr::label(0, 1) })
                .collect(),
            translations: vec![],
            parameters: vec![crate::spec::ParameterRange { label: "b".into(), min: 1.0, max: 2.0, samples: 2 }],
        };
        let mut sched = ControlSchedule::new(2);
        for k in 0..50 {
            sched.push(0.1, vec![(k as f64).sin(), (k as f64 * 0.7).cos()]);
        }
        let t = integrate_single(&spec, &[1.3], &sched).unwrap();
        assert!(t.states.iter().all(|g| g.invariant_residual() < 1e-12));
        let _ = AlgebraElement::zeros(Algebra::Su2);
    }

    #[test]
    fn dense_recording_samples_inside_intervals() {
        let s = rotation_spec(Algebra::So(2), &[(0, 1, "b")], &[], &[("b", 1.0, 2.0, 2)]).unwrap();
        let mut sched = ControlSchedule::new(1);
        sched.push(1.0, vec![1.0]);
        sched.push(1.0, vec![2.0]);
        let t = integrate_single_with(&s, &[1.0], &sched, Recording::Dense(3)).unwrap();
        assert_eq!(t.times.len(), 1 + 2 * 4);
        let b = integrate_single(&s, &[1.0], &sched).unwrap();
        assert!((t.final_state().matrix.clone() - b.final_state().matrix.clone()).camax() < 1e-14);
    }
}
