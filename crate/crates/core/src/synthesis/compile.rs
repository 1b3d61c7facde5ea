use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{inner_product, Algebra, AlgebraElement, GroupElement};
use crate::par::{self, Execution};
use crate::simulator::final_states;
use crate::spec::SystemSpec;

use super::plan::{axis_coords, exact_program_state, Axis, FlowProgram, PrimitiveFlow};
use super::schedule::{ControlSchedule, Pulse};
use super::words::{flow_pulses, BracketWord, DEFAULT_DEPTH_LIMIT, MAX_PULSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileStrategy {
    /// Nested group commutators for every bracket word.
    Commutator,
    /// Axis-aligned blocks as Strang products of conjugated generator flows;
    /// other flows fall back to commutators.
    Conjugation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub strategy: CompileStrategy,
    /// Stop refining once the measured error is at or below this.
    pub target_error: f64,
    pub m_start: usize,
    pub m_max: usize,
    /// Conjugation nodes per axis block.
    pub nodes: usize,
    pub depth_limit: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            strategy: CompileStrategy::Conjugation,
            target_error: 1e-2,
            m_start: 1,
            m_max: 256,
            nodes: 8,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledProgram {
    pub schedule: ControlSchedule,
    pub refinement: usize,
    /// Sup over the grid of ρ(simulated, exact program flow).
    pub compile_error: f64,
    pub converged: bool,
    /// (m, measured error) for every refinement tried.
    pub history: Vec<(usize, f64)>,
}

/// Generator pair used to synthesize one axis by conjugation.
struct Conjugator {
    g: usize,
    h: usize,
    /// +1 keeps the H component (axis has its own generator), -1 keeps [G,H].
    sigma: f64,
}

fn parallel_to(c: [f64; 3], axis: Axis) -> bool {
    let k = axis.index();
    let off = (0..3).filter(|&i| i != k).map(|i| c[i].abs()).fold(0.0, f64::max);
    c[k].abs() > 1e-9 && off <= 1e-12 * c[k].abs()
}

fn choose_conjugator(spec: &SystemSpec, axis: Axis) -> Result<Option<Conjugator>> {
    let unit = spec.channel_matrices(&[1.0]);
    let g = spec.generators.len();
    let coords: Vec<[f64; 3]> = unit[..g].iter().map(axis_coords).collect::<Result<_>>()?;
    if let Some(h) = (0..g).find(|&h| parallel_to(coords[h], axis)) {
        if let Some(gg) = (0..g).find(|&k| !parallel_to(coords[k], axis) && coords[k].iter().any(|v| v.abs() > 1e-9)) {
            return Ok(Some(Conjugator { g: gg, h, sigma: 1.0 }));
        }
    }
    for h in 0..g {
        for gg in 0..g {
            let w = BracketWord::bracket(BracketWord::Gen(gg), BracketWord::Gen(h));
            if parallel_to(axis_coords(&w.evaluate(&unit))?, axis) {
                return Ok(Some(Conjugator { g: gg, h, sigma: -1.0 }));
            }
        }
    }
    Ok(None)
}

/// Axis coordinate of exp(tG) H exp(-tG) at one parameter point.
fn conjugated_coord(spec: &SystemSpec, point: &[f64], c: &Conjugator, t: f64, axis: Axis) -> Result<f64> {
    let mats = spec.real_channel_matrices(point);
    let e = (&mats[c.g] * t).exp();
    let m = &e * &mats[c.h] * e.transpose();
    let v = AlgebraElement::from_real(Algebra::So(3), &m);
    inner_product(&axis.element(), &v)
}

/// One factor exp(a·Ad_{exp(tG)}H) per entry: (t, a).
struct AxisBlock {
    conj: Conjugator,
    factors: Vec<(f64, f64)>,
}

fn conjugation_block(spec: &SystemSpec, grid: &[Vec<f64>], axis: Axis, profile: &[f64], nodes: usize) -> Result<Option<AxisBlock>> {
    let Some(conj) = choose_conjugator(spec, axis)? else { return Ok(None) };
    let gmax = grid
        .iter()
        .map(|p| spec.generators[conj.g].param.eval(p).abs())
        .fold(0.0, f64::max);
    let delta = 2.0 * std::f64::consts::PI / (3.0 * gmax);
    let first = if conj.sigma > 0.0 { 0 } else { 1 };
    let ts: Vec<f64> = (first..=nodes).map(|j| j as f64 * delta).collect();
    let mut v = DMatrix::<f64>::zeros(grid.len(), ts.len());
    for (i, p) in grid.iter().enumerate() {
        for (j, &t) in ts.iter().enumerate() {
            let plus = conjugated_coord(spec, p, &conj, t, axis)?;
            let minus = conjugated_coord(spec, p, &conj, -t, axis)?;
            v[(i, j)] = 0.5 * (plus + conj.sigma * minus);
        }
    }
    let y = DVector::from_column_slice(profile);
    let w = v.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut factors = Vec::new();
    for (&t, &wj) in ts.iter().zip(w.iter()) {
        if t == 0.0 {
            factors.push((0.0, wj));
        } else {
            factors.push((t, 0.5 * wj));
            factors.push((-t, 0.5 * conj.sigma * wj));
        }
    }
    Ok(Some(AxisBlock { conj, factors }))
}

fn push_factor(out: &mut Vec<Pulse>, b: &AxisBlock, t: f64, a: f64) {
    // exp(tG) exp(aH) exp(-tG), rightmost first
    out.push(Pulse { channel: b.conj.g, amount: -t });
    out.push(Pulse { channel: b.conj.h, amount: a });
    out.push(Pulse { channel: b.conj.g, amount: t });
}

/// Palindromic Strang product of the block factors with m steps.
fn strang_pulses(b: &AxisBlock, m: usize, out: &mut Vec<Pulse>) {
    let h = 0.5 / m as f64;
    for _ in 0..m {
        for &(t, a) in &b.factors {
            push_factor(out, b, t, a * h);
        }
        for &(t, a) in b.factors.iter().rev() {
            push_factor(out, b, t, a * h);
        }
    }
}

enum Segment<'a> {
    Direct(&'a [PrimitiveFlow]),
    Block(AxisBlock),
    Commutator(&'a PrimitiveFlow),
}

fn segments<'a>(spec: &SystemSpec, grid: &[Vec<f64>], program: &'a FlowProgram, opts: &CompileOptions) -> Result<Vec<Segment<'a>>> {
    let mut out = Vec::new();
    let flows = &program.flows;
    let mut i = 0;
    while i < flows.len() {
        let axis = flows[i].axis;
        let conj = opts.strategy == CompileStrategy::Conjugation
            && spec.algebra == Algebra::So(3)
            && spec.parameters.len() == 1
            && axis.is_some();
        if !conj {
            out.push(Segment::Commutator(&flows[i]));
            i += 1;
            continue;
        }
        let axis = axis.expect("checked");
        let mut j = i;
        while j < flows.len() && flows[j].axis == Some(axis) {
            j += 1;
        }
        let block = &flows[i..j];
        if block.iter().all(|f| matches!(f.word, BracketWord::Gen(_))) {
            out.push(Segment::Direct(block));
            i = j;
            continue;
        }
        let mut profile = Vec::with_capacity(grid.len());
        for p in grid {
            let mats = spec.channel_matrices(p);
            let mut s = 0.0;
            for f in block {
                s += f.duration * axis_coords(&f.word.evaluate(&mats))?[axis.index()];
            }
            profile.push(s);
        }
        match conjugation_block(spec, grid, axis, &profile, opts.nodes)? {
            Some(b) => out.push(Segment::Block(b)),
            None => out.extend(block.iter().map(Segment::Commutator)),
        }
        i = j;
    }
    Ok(out)
}

fn build(segs: &[Segment], m: usize, channels: usize) -> ControlSchedule {
    let mut pulses = Vec::new();
    for s in segs {
        match s {
            Segment::Direct(flows) => {
                for f in *flows {
                    flow_pulses(&f.word, f.duration, m, &mut pulses);
                }
            }
            Segment::Block(b) => strang_pulses(b, m, &mut pulses),
            Segment::Commutator(f) => flow_pulses(&f.word, f.duration, m, &mut pulses),
        }
    }
    ControlSchedule::from_pulses(channels, &pulses)
}

/// Sup over the grid of the distance between simulated and exact program flows.
pub fn measure_compile_error(
    spec: &SystemSpec,
    grid: &[Vec<f64>],
    program: &FlowProgram,
    schedule: &ControlSchedule,
    exec: Execution,
) -> Result<f64> {
    let sim = final_states(spec, grid, schedule, exec)?;
    let errs = par::map_range(exec, grid.len(), |i| {
        let exact = exact_program_state(spec, &grid[i], program)?;
        distance(&sim.states[i], &exact)
    });
    let mut sup = 0.0f64;
    for e in errs {
        sup = sup.max(e?);
    }
    Ok(sup)
}

fn distance(a: &GroupElement, b: &GroupElement) -> Result<f64> {
    let (r, t) = crate::simulator::point_error(a, b)?;
    Ok(r.max(t))
}

/// Compiles a flow program into one broadcast schedule, doubling the
/// refinement m until the measured error meets the target or m_max is reached.
pub fn compile_program(
    spec: &SystemSpec,
    grid: &[Vec<f64>],
    program: &FlowProgram,
    opts: &CompileOptions,
    exec: Execution,
) -> Result<CompiledProgram> {
    spec.validate()?;
    let channels = spec.channel_count();
    program.validate(channels)?;
    if opts.m_start == 0 || opts.m_max < opts.m_start {
        return Err(Error::Spec("refinement range must satisfy 1 <= m_start <= m_max".into()));
    }
    let segs = segments(spec, grid, program, opts)?;
    for s in &segs {
        if let Segment::Commutator(f) = s {
            if f.word.depth() > opts.depth_limit {
                return Err(Error::CompileDepth { depth: f.word.depth(), limit: opts.depth_limit });
            }
        }
    }
    let mut history = Vec::new();
    let mut best: Option<CompiledProgram> = None;
    let mut m = opts.m_start;
    loop {
        let pulses = segs
            .iter()
            .map(|s| match s {
                Segment::Commutator(f) => f.word.pulse_count(m),
                _ => 0,
            })
            .fold(0usize, usize::saturating_add);
        if pulses > MAX_PULSES {
            if best.is_none() {
                return Err(Error::CompileSize { pulses, limit: MAX_PULSES });
            }
            break;
        }
        let schedule = build(&segs, m, channels);
        let err = measure_compile_error(spec, grid, program, &schedule, exec)?;
        history.push((m, err));
        if best.as_ref().map_or(true, |b| err < b.compile_error) {
            best = Some(CompiledProgram { schedule, refinement: m, compile_error: err, converged: false, history: vec![] });
        }
        if err <= opts.target_error || m >= opts.m_max {
            break;
        }
        m = (m * 2).min(opts.m_max);
    }
    let mut out = best.expect("at least one refinement");
    out.converged = out.compile_error <= opts.target_error;
    out.history = history;
    Ok(out)
}

/// Distance between the simulated single-flow schedule and exp(duration·word)
/// at one point; used to study commutator convergence.
pub fn bracket_flow_error(spec: &SystemSpec, point: &[f64], word: &BracketWord, duration: f64, m: usize) -> Result<f64> {
    let schedule = super::words::compile_bracket_flow(word, duration, m, spec.channel_count())?;
    let program = FlowProgram { chart: vec![], flows: vec![PrimitiveFlow { word: word.clone(), duration, axis: None }] };
    let sim = crate::simulator::integrate_single(spec, point, &schedule)?;
    let exact = exact_program_state(spec, point, &program)?;
    distance(sim.final_state(), &exact)
}
