use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{inner_product, so3_axes, Algebra, AlgebraElement, CMat, GroupElement};
use crate::spec::SystemSpec;

use super::euler::{euler_decompose, EulerProfiles};
use super::fit::{fit_monomials, odd_exponents, MonomialFit};
use super::words::BracketWord;

/// Profiles below this magnitude are treated as identically zero.
const ZERO_PROFILE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn element(self) -> AlgebraElement {
        so3_axes()[self.index()].clone()
    }
}

/// exp(duration · word(β)); `axis` records the rotation axis the word is
/// parallel to, when it is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveFlow {
    pub word: BracketWord,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
}

/// Flows listed in time order; `chart` is the time order of the Euler factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowProgram {
    pub chart: Vec<Axis>,
    pub flows: Vec<PrimitiveFlow>,
}

impl FlowProgram {
    pub fn validate(&self, channels: usize) -> Result<()> {
        for f in &self.flows {
            f.word.validate(channels)?;
            if !f.duration.is_finite() {
                return Err(Error::Numeric("non-finite flow duration".into()));
            }
        }
        Ok(())
    }
}

/// A bracket word whose value is κ β^exponent times a rotation axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisWord {
    pub axis: Axis,
    pub exponent: u32,
    pub kappa: f64,
    pub word: BracketWord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    pub axis: Axis,
    pub fit: MonomialFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct So3Plan {
    pub program: FlowProgram,
    pub fits: Vec<AxisFit>,
    pub predicted_error: f64,
    pub euler: EulerProfiles,
}

fn single_parameter_so3(spec: &SystemSpec) -> Result<()> {
    spec.validate()?;
    if spec.algebra != Algebra::So(3) {
        return Err(Error::Spec("ensemble planning is implemented for SO(3)".into()));
    }
    if spec.parameters.len() != 1 {
        return Err(Error::Spec("ensemble planning needs exactly one parameter".into()));
    }
    Ok(())
}

/// Axis coordinates of a 3x3 skew matrix.
pub(crate) fn axis_coords(m: &CMat) -> Result<[f64; 3]> {
    let e = AlgebraElement::new(Algebra::So(3), m.clone());
    let mut c = [0.0; 3];
    for (k, a) in so3_axes().iter().enumerate() {
        c[k] = inner_product(a, &e)?;
    }
    Ok(c)
}

/// Words ad_a^{2k}(b) and ad_a^{2k}([a,b]) over generator pairs whose value is
/// parallel to one axis, shortest first for each (axis, exponent).
pub fn axis_words(spec: &SystemSpec, max_length: usize) -> Result<Vec<AxisWord>> {
    single_parameter_so3(spec)?;
    let unit: Vec<CMat> = spec.channel_matrices(&[1.0]);
    let deg: Vec<u32> = spec.generators.iter().map(|g| g.param.exponents[0]).collect();
    let g = spec.generators.len();
    let mut candidates = Vec::new();
    for b in 0..g {
        candidates.push(BracketWord::Gen(b));
        for a in (0..g).filter(|&a| a != b) {
            let mut k = 0;
            loop {
                let w1 = BracketWord::ad_power(a, 2 * k, BracketWord::Gen(b));
                let w2 = BracketWord::ad_power(a, 2 * k, BracketWord::bracket(BracketWord::Gen(a), BracketWord::Gen(b)));
                if w1.length() > max_length && w2.length() > max_length {
                    break;
                }
                if k > 0 && w1.length() <= max_length {
                    candidates.push(w1);
                }
                if w2.length() <= max_length {
                    candidates.push(w2);
                }
                k += 1;
            }
        }
    }
    candidates.sort_by_key(|w| w.length());
    let mut found: BTreeMap<(Axis, u32), AxisWord> = BTreeMap::new();
    for w in candidates {
        let c = axis_coords(&w.evaluate(&unit))?;
        let (k, kappa) = c.iter().cloned().enumerate().fold((0usize, 0.0f64), |acc, (i, v)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
        let off = c.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, v)| v.abs()).fold(0.0, f64::max);
        if kappa.abs() < 1e-9 || off > 1e-12 * kappa.abs() {
            continue;
        }
        let axis = Axis::ALL[k];
        let exponent = w.letters().iter().map(|&l| deg[l]).sum();
        found.entry((axis, exponent)).or_insert(AxisWord { axis, exponent, kappa, word: w });
    }
    Ok(found.into_values().collect())
}

/// Euler-decomposes the target, fits each angle profile over the monomials
/// reachable by bracket words and emits one flow per nonzero coefficient.
///
/// Each axis uses the (degree_bound+1)/2 lowest reachable exponents; these are
/// β, β³, … for an axis carrying its own generator.
pub fn plan_so3_ensemble(
    spec: &SystemSpec,
    grid: &[Vec<f64>],
    targets: &[GroupElement],
    degree_bound: usize,
    tol: f64,
) -> Result<So3Plan> {
    single_parameter_so3(spec)?;
    if !(tol > 0.0) {
        return Err(Error::Spec("tolerance must be positive".into()));
    }
    if grid.len() != targets.len() {
        return Err(Error::Grid("one target per grid point is required".into()));
    }
    if grid.iter().any(|p| p.len() != 1) {
        return Err(Error::Grid("grid points must have one coordinate".into()));
    }
    let terms = odd_exponents(degree_bound)?.len();
    let beta: Vec<f64> = grid.iter().map(|p| p[0]).collect();
    let euler = euler_decompose(targets)?;
    let words = axis_words(spec, 2 * degree_bound + 2)?;
    let chart = vec![Axis::Z, Axis::Y, Axis::X];
    let mut flows = Vec::new();
    let mut fits = Vec::new();
    for &axis in &chart {
        let profile = match axis {
            Axis::X => &euler.x,
            Axis::Y => &euler.y,
            Axis::Z => &euler.z,
        };
        if profile.iter().all(|v| v.abs() <= ZERO_PROFILE) {
            continue;
        }
        let available: Vec<&AxisWord> = words.iter().filter(|w| w.axis == axis).take(terms).collect();
        if available.is_empty() {
            return Err(Error::Uncontrollable {
                obstruction: format!("no bracket word of the generators reaches the {axis:?} axis"),
            });
        }
        let exps: Vec<u32> = available.iter().map(|w| w.exponent).collect();
        let fit = fit_monomials(&beta, profile, &exps)?;
        for (w, &c) in available.iter().zip(&fit.coefficients) {
            if c != 0.0 {
                flows.push(PrimitiveFlow { word: w.word.clone(), duration: c / w.kappa, axis: Some(axis) });
            }
        }
        fits.push(AxisFit { axis, fit });
    }
    let predicted_error: f64 = fits.iter().map(|f| f.fit.sup_error).sum();
    if predicted_error > tol {
        return Err(Error::DegreeInsufficient { achieved: predicted_error, tol });
    }
    Ok(So3Plan { program: FlowProgram { chart, flows }, fits, predicted_error, euler })
}

/// Product of the exact flows exp(duration·word(β)) at one parameter point.
pub fn exact_program_state(spec: &SystemSpec, point: &[f64], program: &FlowProgram) -> Result<GroupElement> {
    let mats = spec.channel_matrices(point);
    let mut g = GroupElement::identity(spec.algebra);
    for f in &program.flows {
        let v = f.word.evaluate(&mats) * num_complex::Complex64::new(f.duration, 0.0);
        let e = crate::lie_core::expm(&AlgebraElement::new(spec.algebra, v))?;
        g = e.mul(&g)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::{expm, geodesic_distance};
    use crate::spec::rotation_spec;

    /// {βΩ_x, βΩ_y}: Ω_x = -O_23, Ω_y = O_13, so the x generator carries a sign
    /// through κ.
    fn xy_spec(samples: usize) -> SystemSpec {
        rotation_spec(Algebra::So(3), &[(1, 2, "b"), (0, 2, "b")], &[], &[("b", 1.0, 2.0, samples)]).unwrap()
    }

    #[test]
    fn axis_words_reach_expected_powers() {
        let w = axis_words(&xy_spec(3), 6).unwrap();
        let exps = |a: Axis| w.iter().filter(|x| x.axis == a).map(|x| x.exponent).collect::<Vec<_>>();
        assert_eq!(exps(Axis::X), vec![1, 3, 5]);
        assert_eq!(exps(Axis::Y), vec![1, 3, 5]);
        assert_eq!(exps(Axis::Z), vec![2, 4, 6]);
        let x1 = w.iter().find(|x| x.axis == Axis::X && x.exponent == 1).unwrap();
        assert_eq!(x1.kappa, -1.0);
    }

    #[test]
    fn identity_target_gives_empty_program() {
        let s = xy_spec(5);
        let grid = s.grid();
        let t = vec![GroupElement::identity(Algebra::So(3)); grid.len()];
        let p = plan_so3_ensemble(&s, &grid, &t, 5, 1e-6).unwrap();
        assert!(p.program.flows.is_empty());
        assert_eq!(p.predicted_error, 0.0);
    }

    #[test]
    fn one_primitive_flow_target() {
        let s = rotation_spec(Algebra::So(3), &[(1, 2, "b")], &[], &[("b", 1.0, 2.0, 5)]).unwrap();
        let grid = s.grid();
        let x = Axis::X.element();
        let t: Vec<_> = grid.iter().map(|p| expm(&x.scale(p[0])).unwrap()).collect();
        let p = plan_so3_ensemble(&s, &grid, &t, 11, 1e-9).unwrap();
        assert_eq!(p.program.flows.len(), 1);
        assert_eq!(p.program.flows[0].word, BracketWord::Gen(0));
        assert!((p.program.flows[0].duration + 1.0).abs() < 1e-12);
        assert!(p.predicted_error < 1e-12);
        for (pt, tg) in grid.iter().zip(&t) {
            let g = exact_program_state(&s, pt, &p.program).unwrap();
            assert!(geodesic_distance(&g, tg).unwrap() < 1e-12);
        }
    }

    #[test]
    fn constant_x_target_predicts_fit_baseline() {
        let s = xy_spec(21);
        let grid = s.grid();
        let t = vec![expm(&Axis::X.element()).unwrap(); grid.len()];
        let p = plan_so3_ensemble(&s, &grid, &t, 11, 0.01).unwrap();
        assert!((p.predicted_error - 9.287e-4).abs() < 1e-6);
        assert!(matches!(
            plan_so3_ensemble(&s, &grid, &t, 11, 1e-4),
            Err(Error::DegreeInsufficient { .. })
        ));
    }

    #[test]
    fn program_realizes_fitted_profiles_exactly() {
        let s = xy_spec(9);
        let grid = s.grid();
        let euler = [0.4, -0.3, 0.6];
        let r = super::super::euler::euler_compose(euler);
        let t = vec![GroupElement::from_real(Algebra::So(3), &r); grid.len()];
        let p = plan_so3_ensemble(&s, &grid, &t, 7, 0.1).unwrap();
        for pt in &grid {
            let fitted: Vec<f64> = [Axis::X, Axis::Y, Axis::Z]
                .iter()
                .map(|a| p.fits.iter().find(|f| f.axis == *a).unwrap().fit.eval(pt[0]))
                .collect();
            let want = super::super::euler::euler_compose([fitted[0], fitted[1], fitted[2]]);
            let got = exact_program_state(&s, pt, &p.program).unwrap().real_part();
            assert!((got - want).amax() < 1e-10);
        }
    }
}
