//! Lie closure of parameter-dependent generators sampled on a grid.
//!
//! Each element is a function from grid points to the algebra, stored as its
//! flattened coordinate vector (basis-major, then grid order). Brackets act
//! pointwise through the structure table, so no matrices are formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::larc::dot;
use crate::lie_core::{standard_basis, structure_table, StructureTable};
use crate::par::{self, Execution};
use crate::spec::SystemSpec;

pub const FN_CLOSURE_TOL: f64 = 1e-8;
pub const GRID_MIN: f64 = 0.5;
pub const GRID_MAX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    Saturated,
    Stalled,
    /// Depth budget ran out before either outcome.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnClosureResult {
    /// dims[d-1] is the dimension after words of length ≤ d.
    pub dims: Vec<usize>,
    pub target_dimension: usize,
    pub grid_size: usize,
    pub verdict: ProbeVerdict,
    /// Ratio of extreme singular values of the accepted (normalized, not
    /// orthogonalized) bracket vectors.
    pub condition_number: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub depth_to_saturation: Option<usize>,
    pub final_dimension: usize,
    pub deficiency: usize,
    pub condition_number: f64,
    pub verdict: ProbeVerdict,
}

/// Grid-sampled generator: coefficient at each grid point along one basis direction.
struct SampledGenerator {
    index: usize,
    values: Vec<f64>,
}

pub fn validate_grid(grid: &[Vec<f64>], arity: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    for p in grid {
        if p.len() != arity {
            return Err(Error::Grid(format!("grid point {p:?} has {} coordinates, need {arity}", p.len())));
        }
        if p.iter().any(|&b| !(GRID_MIN..=GRID_MAX).contains(&b)) {
            return Err(Error::Grid(format!("grid point {p:?} leaves [{GRID_MIN}, {GRID_MAX}]")));
        }
    }
    for (i, p) in grid.iter().enumerate() {
        if grid[..i].iter().any(|q| q == p) {
            return Err(Error::Grid(format!("duplicate grid point {p:?}")));
        }
    }
    Ok(())
}

struct Workspace {
    dim: usize,
    points: usize,
    table: StructureTable,
    gens: Vec<SampledGenerator>,
}

impl Workspace {
    /// [u, g] pointwise for a sampled generator g.
    fn bracket_with(&self, u: &[f64], g: &SampledGenerator) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for a in 0..self.dim {
            let Some(e) = self.table.get(a, g.index) else { continue };
            for p in 0..self.points {
                out[e.index * self.points + p] += e.coeff * u[a * self.points + p] * g.values[p];
            }
        }
        out
    }

    fn seed(&self, g: &SampledGenerator) -> Vec<f64> {
        let mut v = vec![0.0; self.dim * self.points];
        v[g.index * self.points..(g.index + 1) * self.points].copy_from_slice(&g.values);
        v
    }
}

struct Orthonormal {
    vectors: Vec<Vec<f64>>,
    raw: Vec<Vec<f64>>,
    tol: f64,
    floor: f64,
}

impl Orthonormal {
    fn insert(&mut self, mut v: Vec<f64>) -> bool {
        let norm = dot(&v, &v).sqrt();
        if norm <= self.floor {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let raw = v.clone();
        for _ in 0..2 {
            for b in &self.vectors {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let r = dot(&v, &v).sqrt();
        if r <= self.tol {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= r);
        self.vectors.push(v);
        self.raw.push(raw);
        true
    }

    fn condition(&self) -> f64 {
        if self.raw.is_empty() {
            return 1.0;
        }
        let m = nalgebra::DMatrix::from_fn(self.raw[0].len(), self.raw.len(), |i, j| self.raw[j][i]);
        let sv = m.svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 { max / min } else { f64::INFINITY }
    }
}

pub fn fn_lie_closure(spec: &SystemSpec, grid: &[Vec<f64>], max_depth: usize, tol: f64) -> Result<FnClosureResult> {
    fn_lie_closure_with(spec, grid, max_depth, tol, Execution::default())
}

pub fn fn_lie_closure_with(
    spec: &SystemSpec,
    grid: &[Vec<f64>],
    max_depth: usize,
    tol: f64,
    exec: Execution,
) -> Result<FnClosureResult> {
    spec.validate()?;
    if max_depth == 0 {
        return Err(Error::Spec("max_depth must be at least 1".into()));
    }
    validate_grid(grid, spec.parameters.len())?;
    let basis = standard_basis(spec.algebra)?;
    let table = structure_table(&basis)?;
    let dim = basis.len();
    let points = grid.len();
    let mut gens: Vec<SampledGenerator> = spec
        .generators
        .iter()
        .map(|g| SampledGenerator {
            index: basis.iter().position(|b| b.kind == g.basis.kind).expect("standard generator"),
            values: grid.iter().map(|p| g.param.eval(p)).collect(),
        })
        .collect();
    let n = spec.n();
    for &k in &spec.translations {
        gens.push(SampledGenerator { index: n * (n - 1) / 2 + k, values: vec![1.0; points] });
    }
    let gmax = gens.iter().flat_map(|g| g.values.iter().cloned()).fold(0.0, f64::max);
    let ws = Workspace { dim, points, table, gens };
    let target = dim * points;
    let mut span = Orthonormal { vectors: Vec::new(), raw: Vec::new(), tol, floor: 1e-12 * gmax.max(1.0) };
    for g in &ws.gens {
        span.insert(ws.seed(g));
    }
    let mut dims = vec![span.vectors.len()];
    let mut idle = 0;
    let mut verdict = ProbeVerdict::Unresolved;
    for _depth in 2..=max_depth {
        if span.vectors.len() == target {
            break;
        }
        let current = span.vectors.clone();
        let pairs: Vec<(usize, usize)> =
            (0..current.len()).flat_map(|i| (0..ws.gens.len()).map(move |g| (i, g))).collect();
        let candidates = par::map(exec, &pairs, |&(i, g)| ws.bracket_with(&current[i], &ws.gens[g]));
        let before = span.vectors.len();
        for c in candidates {
            if span.vectors.len() == target {
                break;
            }
            span.insert(c);
        }
        dims.push(span.vectors.len());
        if span.vectors.len() == before {
            idle += 1;
            if idle >= 2 {
                verdict = ProbeVerdict::Stalled;
                break;
            }
        } else {
            idle = 0;
        }
    }
    if span.vectors.len() == target {
        verdict = ProbeVerdict::Saturated;
    }
    Ok(FnClosureResult { dims, target_dimension: target, grid_size: points, verdict, condition_number: span.condition() })
}

pub fn saturation_report(result: &FnClosureResult) -> SaturationReport {
    let final_dimension = result.dims.last().copied().unwrap_or(0);
    SaturationReport {
        depth_to_saturation: result
            .dims
            .iter()
            .position(|&d| d == result.target_dimension)
            .map(|i| i + 1),
        final_dimension,
        deficiency: result.target_dimension - final_dimension,
        condition_number: result.condition_number,
        verdict: result.verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::Algebra;
    use crate::spec::rotation_spec;

    fn so2() -> SystemSpec {
        rotation_spec(Algebra::So(2), &[(0, 1, "b")], &[], &[("b", 1.0, 2.0, 3)]).unwrap()
    }

    fn xy_system() -> SystemSpec {
        rotation_spec(Algebra::So(3), &[(1, 2, "b"), (0, 2, "b")], &[], &[("b", 1.0, 2.0, 3)]).unwrap()
    }

    #[test]
    fn so2_stalls() {
        let r = fn_lie_closure(&so2(), &so2().grid(), 12, FN_CLOSURE_TOL).unwrap();
        assert_eq!(r.dims, vec![1, 1, 1]);
        assert_eq!(r.verdict, ProbeVerdict::Stalled);
        let s = saturation_report(&r);
        assert_eq!(s.deficiency, 3 - 1);
        assert_eq!(s.depth_to_saturation, None);
    }

    #[test]
    fn xy_system_saturates() {
        let s = xy_system();
        let r = fn_lie_closure(&s, &s.grid(), 9, FN_CLOSURE_TOL).unwrap();
        assert_eq!(r.verdict, ProbeVerdict::Saturated);
        assert_eq!(*r.dims.last().unwrap(), 9);
        let rep = saturation_report(&r);
        assert_eq!(rep.deficiency, 0);
        assert!(rep.depth_to_saturation.unwrap() <= 9);
        assert!(r.dims.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let s = xy_system();
        let a = fn_lie_closure_with(&s, &s.grid(), 9, FN_CLOSURE_TOL, Execution::Sequential).unwrap();
        let b = fn_lie_closure_with(&s, &s.grid(), 9, FN_CLOSURE_TOL, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_errors() {
        let s = xy_system();
        let dup = vec![vec![1.0], vec![1.0]];
        assert!(matches!(fn_lie_closure(&s, &dup, 3, FN_CLOSURE_TOL), Err(Error::Grid(_))));
        let far = vec![vec![1.0], vec![5.0]];
        assert!(matches!(fn_lie_closure(&s, &far, 3, FN_CLOSURE_TOL), Err(Error::Grid(_))));
    }
}
