//! Control synthesis: profile fitting, Euler factorization, bracket-flow
//! programs and their compilation into broadcast piecewise-constant controls,
//! and three-phase SE(n) steering.

mod compile;
mod euler;
mod fit;
mod plan;
mod schedule;
mod steer;
mod words;

pub use compile::{
    bracket_flow_error, compile_program, measure_compile_error, CompileOptions, CompileStrategy, CompiledProgram,
};
pub use euler::{euler_compose, euler_decompose, euler_xyz, EulerProfiles, GIMBAL_TOL};
pub use fit::{fit_monomials, fit_odd_polynomial, odd_exponents, MonomialFit, OddPolynomialFit, MAX_GRAM_CONDITION};
pub use plan::{
    axis_words, exact_program_state, plan_so3_ensemble, Axis, AxisFit, AxisWord, FlowProgram, PrimitiveFlow, So3Plan,
};
pub use schedule::{merge_pulses, ControlSchedule, Pulse};
pub use steer::{rotation_between, three_step_steer_sen, SteeringPhase, SteeringPlan};
pub use words::{compile_bracket_flow, compile_bracket_flow_with_limit, BracketWord, DEFAULT_DEPTH_LIMIT, MAX_PULSES};
