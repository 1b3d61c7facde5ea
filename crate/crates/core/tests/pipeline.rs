use lie_ensemble::lie_core::{ensemble_distance, expm, so3_axes, Algebra, EnsembleState, GroupElement};
use lie_ensemble::par::Execution;
use lie_ensemble::simulator::{final_states, integrate_single};
use lie_ensemble::spec::{rotation_spec, SpecFile, SystemSpec};
use lie_ensemble::synthesis::{
    compile_program, euler_compose, plan_so3_ensemble, BracketWord, CompileOptions, CompileStrategy, ControlSchedule,
    FlowProgram, PrimitiveFlow, MAX_PULSES,
};
use lie_ensemble::Error;
use nalgebra::DMatrix;

fn so3_xy(samples: usize) -> SystemSpec {
    rotation_spec(Algebra::So(3), &[(1, 2, "b"), (0, 2, "b")], &[], &[("b", 1.0, 2.0, samples)]).unwrap()
}

/// Plans, compiles and simulates; returns (distance, predicted, compile).
fn run_pipeline(spec: &SystemSpec, targets: &[GroupElement], opts: CompileOptions) -> (f64, f64, f64) {
    let grid = spec.grid();
    let tol = 0.05;
    let plan = plan_so3_ensemble(spec, &grid, targets, 11, tol).unwrap();
    let opts = CompileOptions { target_error: tol - plan.predicted_error, ..opts };
    let compiled = compile_program(spec, &grid, &plan.program, &opts, Execution::default()).unwrap();
    assert!(compiled.converged);
    let reached = final_states(spec, &grid, &compiled.schedule, Execution::default()).unwrap();
    let want = EnsembleState { grid, states: targets.to_vec() };
    (ensemble_distance(&reached, &want).unwrap(), plan.predicted_error, compiled.compile_error)
}

#[test]
fn se2_commutator_cycle_matches_closed_form() {
    let spec = rotation_spec(Algebra::Se(2), &[(0, 1, "b")], &[0], &[("b", 1.0, 2.0, 2)]).unwrap();
    for s in [0.05, 0.3, 1.0, 2.5] {
        // time order realizes exp(sA) exp(sB) exp(-sA) exp(-sB)
        let mut sched = ControlSchedule::new(2);
        sched.push(s, vec![0.0, -1.0]);
        sched.push(s, vec![-1.0, 0.0]);
        sched.push(s, vec![0.0, 1.0]);
        sched.push(s, vec![1.0, 0.0]);
        let g = integrate_single(&spec, &[1.0], &sched).unwrap().final_state().real_part();
        // exp(sΩ_12) e_1 = (cos s, -sin s)
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, s * (s.cos() - 1.0), 0.0, 1.0, -s * s.sin(), 0.0, 0.0, 1.0]);
        assert!((g - want).amax() < 1e-12, "s = {s}");
    }
}

#[test]
fn pipeline_meets_bound_on_several_targets() {
    let spec = so3_xy(21);
    let grid = spec.grid();
    let [x, y, z] = so3_axes();
    let constant = |angles: [f64; 3]| vec![GroupElement::from_real(Algebra::So(3), &euler_compose(angles)); grid.len()];
    let cases: Vec<(&str, Vec<GroupElement>)> = vec![
        ("regression", constant([1.0, 0.5, -0.7])),
        ("small", constant([0.2, -0.1, 0.15])),
        ("z only", vec![expm(&z.scale(0.6)).unwrap(); grid.len()]),
        ("beta x", grid.iter().map(|p| expm(&x.scale(p[0])).unwrap()).collect()),
        ("beta y", grid.iter().map(|p| expm(&y.scale(-0.5 * p[0])).unwrap()).collect()),
    ];
    for (name, targets) in cases {
        let (dist, predicted, compile) = run_pipeline(&spec, &targets, CompileOptions::default());
        assert!(dist <= predicted + compile + 1e-9, "{name}: {dist} > {predicted} + {compile}");
        assert!(dist <= 0.05, "{name}: {dist}");
    }
}

#[test]
fn underdetermined_fit_is_refused() {
    let spec = so3_xy(5);
    let grid = spec.grid();
    let targets = vec![GroupElement::from_real(Algebra::So(3), &euler_compose([0.3, 0.2, -0.1])); grid.len()];
    assert!(plan_so3_ensemble(&spec, &grid, &targets, 11, 0.05).is_err());
}

#[test]
fn identity_target_needs_no_controls() {
    let spec = so3_xy(5);
    let grid = spec.grid();
    let targets = vec![GroupElement::identity(Algebra::So(3)); grid.len()];
    let plan = plan_so3_ensemble(&spec, &grid, &targets, 11, 0.05).unwrap();
    assert!(plan.program.flows.is_empty());
    assert_eq!(plan.predicted_error, 0.0);
}

#[test]
fn commutator_strategy_stays_within_pulse_budget() {
    let spec = so3_xy(11);
    let grid = spec.grid();
    let targets = vec![GroupElement::from_real(Algebra::So(3), &euler_compose([0.3, 0.2, -0.1])); grid.len()];
    let plan = plan_so3_ensemble(&spec, &grid, &targets, 11, 0.05).unwrap();
    let opts = CompileOptions {
        strategy: CompileStrategy::Commutator,
        target_error: 0.05 - plan.predicted_error,
        m_max: 4096,
        depth_limit: 12,
        ..CompileOptions::default()
    };
    match compile_program(&spec, &grid, &plan.program, &opts, Execution::default()) {
        Ok(c) => {
            assert!(c.schedule.len() <= MAX_PULSES);
            assert_eq!(c.converged, c.compile_error <= opts.target_error);
        }
        Err(e) => assert!(matches!(e, Error::CompileSize { .. }), "{e}"),
    }
}

#[test]
fn shallow_commutator_flows_converge() {
    let spec = so3_xy(5);
    let grid = spec.grid();
    // exp(0.2·[Ω_y, Ω_x]) uses one depth-2 word
    let program = FlowProgram {
        chart: vec![],
        flows: vec![PrimitiveFlow { word: BracketWord::bracket(BracketWord::Gen(1), BracketWord::Gen(0)), duration: 0.2, axis: None }],
    };
    let opts = CompileOptions { strategy: CompileStrategy::Commutator, target_error: 2e-2, m_max: 1024, ..CompileOptions::default() };
    let c = compile_program(&spec, &grid, &program, &opts, Execution::default()).unwrap();
    assert!(c.converged && c.compile_error <= 2e-2, "{:?}", c.history);
    assert!(c.history.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn parallel_and_sequential_agree() {
    let spec = so3_xy(21);
    let grid = spec.grid();
    let targets = vec![GroupElement::from_real(Algebra::So(3), &euler_compose([1.0, 0.5, -0.7])); grid.len()];
    let plan = plan_so3_ensemble(&spec, &grid, &targets, 11, 0.05).unwrap();
    let opts = CompileOptions::default();
    let a = compile_program(&spec, &grid, &plan.program, &opts, Execution::Parallel).unwrap();
    let b = compile_program(&spec, &grid, &plan.program, &opts, Execution::Sequential).unwrap();
    assert_eq!(a.schedule, b.schedule);
    assert_eq!(a.compile_error, b.compile_error);
    let fa = final_states(&spec, &grid, &a.schedule, Execution::Parallel).unwrap();
    let fb = final_states(&spec, &grid, &a.schedule, Execution::Sequential).unwrap();
    for (p, q) in fa.states.iter().zip(&fb.states) {
        assert_eq!(p.matrix, q.matrix);
    }
}

#[test]
fn spec_files_round_trip() {
    for spec in [
        so3_xy(7),
        rotation_spec(Algebra::Se(3), &[(0, 1, "b"), (1, 2, "b^2")], &[2], &[("b", 0.5, 1.5, 4)]).unwrap(),
    ] {
        let text = SpecFile::from_spec(&spec).to_json();
        let back = SpecFile::from_json(&text).unwrap().into_spec().unwrap();
        assert_eq!(back.grid(), spec.grid());
        let p = spec.nominal_point();
        assert_eq!(back.channel_matrices(&p), spec.channel_matrices(&p));
    }
}
