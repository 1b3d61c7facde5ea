//! Lie algebra rank condition, structural obstructions and the ensemble verdict.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{
    bracket, inner_product, standard_basis, structure_table, Algebra, AlgebraElement,
};
use crate::spec::SystemSpec;

pub const CLOSURE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Obstruction {
    RankDeficit,
    NontrivialCenter,
    So2Nilpotent,
    NoTranslationChannel,
    SphereIntransitive,
}

impl Obstruction {
    pub fn tag(&self) -> &'static str {
        match self {
            Obstruction::RankDeficit => "rank-deficit",
            Obstruction::NontrivialCenter => "nontrivial-center",
            Obstruction::So2Nilpotent => "so2-nilpotent",
            Obstruction::NoTranslationChannel => "no-translation-channel",
            Obstruction::SphereIntransitive => "sphere-intransitive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Controllable,
    Uncontrollable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllabilityReport {
    pub verdict: Verdict,
    pub closure_dimension: usize,
    pub algebra_dimension: usize,
    pub closure_basis: Vec<AlgebraElement>,
    pub obstruction: Option<Obstruction>,
}

impl ControllabilityReport {
    fn new(closure: Closure, algebra_dimension: usize, obstruction: Option<Obstruction>) -> Self {
        let obstruction = match obstruction {
            None if closure.dimension < algebra_dimension => Some(Obstruction::RankDeficit),
            o => o,
        };
        let verdict = if obstruction.is_none() { Verdict::Controllable } else { Verdict::Uncontrollable };
        ControllabilityReport {
            verdict,
            closure_dimension: closure.dimension,
            algebra_dimension,
            closure_basis: closure.basis,
            obstruction,
        }
    }

    pub fn is_controllable(&self) -> bool {
        self.verdict == Verdict::Controllable
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Closure {
    pub basis: Vec<AlgebraElement>,
    pub dimension: usize,
}

/// Orthonormal set of flattened algebra elements.
struct Span {
    vectors: Vec<Vec<f64>>,
    elements: Vec<AlgebraElement>,
    tol: f64,
}

impl Span {
    fn new(tol: f64) -> Self {
        Span { vectors: Vec::new(), elements: Vec::new(), tol }
    }

    /// Adds the component of `e` orthogonal to the span if its relative size exceeds tol.
    fn insert(&mut self, e: &AlgebraElement) -> bool {
        let mut v = e.flatten();
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
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
        let elem = unflatten(e.algebra, e.matrix.nrows(), &v);
        self.vectors.push(v);
        self.elements.push(elem);
        true
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unflatten(algebra: Algebra, d: usize, v: &[f64]) -> AlgebraElement {
    let s = algebra.trace_weight().sqrt();
    let m = DMatrix::from_fn(d, d, |i, j| {
        // flatten walks column-major storage
        let k = 2 * (j * d + i);
        num_complex::Complex64::new(v[k] / s, v[k + 1] / s)
    });
    AlgebraElement::new(algebra, m)
}

/// Smallest bracket-closed subspace containing the generators, as an
/// orthonormal basis.
pub fn lie_closure(generators: &[AlgebraElement], ambient_dim: usize, tol: f64) -> Result<Closure> {
    if !(tol > 0.0) {
        return Err(Error::Spec("closure tolerance must be positive".into()));
    }
    let mut span = Span::new(tol);
    for g in generators {
        span.insert(g);
    }
    let mut rounds = 0;
    loop {
        let before = span.elements.len();
        let current = span.elements.clone();
        for (i, a) in current.iter().enumerate() {
            for g in generators {
                span.insert(&bracket(a, g)?);
            }
            for b in &current[i + 1..] {
                span.insert(&bracket(a, b)?);
            }
        }
        if span.elements.len() > ambient_dim {
            return Err(Error::Internal(format!(
                "closure dimension {} exceeds ambient dimension {ambient_dim}",
                span.elements.len()
            )));
        }
        if span.elements.len() == before {
            break;
        }
        rounds += 1;
        if rounds > ambient_dim {
            return Err(Error::Internal("closure did not reach a fixpoint".into()));
        }
    }
    let dimension = span.elements.len();
    Ok(Closure { basis: span.elements, dimension })
}

fn nominal_elements(spec: &SystemSpec) -> Vec<AlgebraElement> {
    let mut out: Vec<AlgebraElement> =
        spec.generators.iter().map(|g| g.basis.element()).collect();
    for m in spec.translation_matrices() {
        out.push(AlgebraElement::new(spec.algebra, m));
    }
    out
}

fn real_block(e: &AlgebraElement, n: usize) -> DMatrix<f64> {
    e.matrix.view((0, 0), (n, n)).map(|z| z.re)
}

fn matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol * top.max(1.0)).count()
}

/// Does the rotation algebra act transitively on S^{n-1}? Tested through
/// the tangent rank at e_1..e_n and the normalized all-ones vector.
pub fn sphere_transitive(rotations: &[DMatrix<f64>], n: usize) -> bool {
    let mut points: Vec<DVector<f64>> = (0..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            e
        })
        .collect();
    points.push(DVector::from_element(n, 1.0 / (n as f64).sqrt()));
    points.iter().all(|x| {
        if rotations.is_empty() {
            return n <= 1;
        }
        let cols: Vec<DVector<f64>> = rotations.iter().map(|a| a * x).collect();
        matrix_rank(&DMatrix::from_columns(&cols), 1e-10) == n - 1
    })
}

/// Dimension of the smallest subspace containing `seeds` and invariant under `ops`.
pub fn invariant_subspace_dim(ops: &[DMatrix<f64>], seeds: &[DVector<f64>], n: usize) -> usize {
    let mut cols: Vec<DVector<f64>> = seeds.to_vec();
    let mut rank = matrix_rank(&DMatrix::from_columns(&cols), 1e-10);
    if cols.is_empty() {
        return 0;
    }
    loop {
        let mut next = cols.clone();
        for a in ops {
            for c in &cols {
                next.push(a * c);
            }
        }
        let r = matrix_rank(&DMatrix::from_columns(&next), 1e-10);
        // keep an orthonormal representative set to bound growth
        let svd = DMatrix::from_columns(&next).svd(true, false);
        let u = svd.u.expect("left vectors requested");
        cols = (0..r).map(|k| u.column(k).into_owned()).collect();
        if r == rank || r == n {
            return r;
        }
        rank = r;
    }
}

/// Classical controllability of a single system (labels replaced by 1).
pub fn check_classical(spec: &SystemSpec) -> Result<ControllabilityReport> {
    spec.validate()?;
    let algebra_dimension = spec
        .algebra
        .dimension()
        .ok_or_else(|| Error::Spec("generic algebras are not supported".into()))?;
    let closure = lie_closure(&nominal_elements(spec), algebra_dimension, CLOSURE_TOL)?;
    let obstruction = match spec.algebra {
        Algebra::Se(n) => {
            let rot = lie_closure(&nominal_elements(&spec.rotational_part()?), n * (n - 1) / 2, CLOSURE_TOL)?;
            let rot_blocks: Vec<DMatrix<f64>> = rot.basis.iter().map(|e| real_block(e, n)).collect();
            let seeds: Vec<DVector<f64>> = spec
                .translations
                .iter()
                .map(|&k| {
                    let mut e = DVector::zeros(n);
                    e[k] = 1.0;
                    e
                })
                .collect();
            if spec.translations.is_empty() {
                Some(Obstruction::NoTranslationChannel)
            } else if !sphere_transitive(&rot_blocks, n) {
                Some(Obstruction::SphereIntransitive)
            } else if invariant_subspace_dim(&rot_blocks, &seeds, n) < n {
                Some(Obstruction::RankDeficit)
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(ControllabilityReport::new(closure, algebra_dimension, obstruction))
}

/// Basis of the center of the Lie algebra generated by `generators`.
pub fn center_of_closure(generators: &[AlgebraElement]) -> Result<Vec<AlgebraElement>> {
    let Some(first) = generators.first() else {
        return Ok(Vec::new());
    };
    let d = first.matrix.nrows();
    let ambient = first.algebra.dimension().unwrap_or(2 * d * d);
    let closure = lie_closure(generators, ambient, CLOSURE_TOL)?;
    center_of_basis(&closure.basis)
}

/// Center of the span of an orthonormal, bracket-closed basis.
pub fn center_of_basis(basis: &[AlgebraElement]) -> Result<Vec<AlgebraElement>> {
    let k = basis.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    // column a: stacked flattenings of [e_a, e_b] over all b
    let mut cols = Vec::with_capacity(k);
    for a in 0..k {
        let mut col = Vec::new();
        for b in 0..k {
            col.extend(bracket(&basis[a], &basis[b])?.flatten());
        }
        cols.push(DVector::from_vec(col));
    }
    let m = DMatrix::from_columns(&cols);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right vectors requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut center = Vec::new();
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.resize(k, 0.0);
    for (r, &s) in sv.iter().enumerate() {
        if s > CLOSURE_TOL * top {
            continue;
        }
        let mut z = AlgebraElement::zeros(basis[0].algebra);
        z.matrix = basis[0].matrix.map(|_| num_complex::Complex64::new(0.0, 0.0));
        for a in 0..k {
            z = z.add(&basis[a].scale(vt[(r, a)]))?;
        }
        center.push(z);
    }
    Ok(center)
}

/// Ensemble verdict: the classical verdict unless the SO(2) or center
/// obstruction applies.
pub fn check_ensemble(spec: &SystemSpec) -> Result<ControllabilityReport> {
    for p in &spec.parameters {
        if !(p.min > 0.0) {
            return Err(Error::Spec(format!("parameter {} interval must be positive", p.label)));
        }
    }
    let mut report = check_classical(spec)?;
    let rotation_n = match spec.algebra {
        Algebra::So(n) | Algebra::Se(n) => Some(n),
        _ => None,
    };
    let obstruction = if rotation_n == Some(2) {
        Some(Obstruction::So2Nilpotent)
    } else if !center_of_basis(&report.closure_basis)?.is_empty() {
        Some(Obstruction::NontrivialCenter)
    } else {
        report.obstruction
    };
    report.obstruction = obstruction;
    report.verdict = if obstruction.is_none() { Verdict::Controllable } else { Verdict::Uncontrollable };
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialCertificate {
    /// 0-based standard-basis index.
    pub basis_index: usize,
    pub label: String,
    pub exponents: Vec<u32>,
    pub depth: usize,
}

/// For each reachable basis element, the first parameter monomial found by a
/// breadth-first bracket search from the labeled generators.
pub fn monomial_certificates(spec: &SystemSpec) -> Result<Vec<MonomialCertificate>> {
    spec.validate()?;
    if !matches!(spec.algebra, Algebra::So(_) | Algebra::Se(_)) {
        return Err(Error::Spec("monomial certificates need an SO(n) or SE(n) spec".into()));
    }
    let basis = standard_basis(spec.algebra)?;
    let table = structure_table(&basis)?;
    let labels = spec.parameters.len();
    let mut gens: Vec<(usize, Vec<u32>)> = Vec::new();
    for g in &spec.generators {
        let idx = basis
            .iter()
            .position(|b| b.kind == g.basis.kind)
            .ok_or_else(|| Error::NonClosedBasis(g.basis.label.clone()))?;
        gens.push((idx, g.param.exponents.clone()));
    }
    let n = spec.n();
    for &k in &spec.translations {
        gens.push((n * (n - 1) / 2 + k, vec![0; labels]));
    }
    let mut found: Vec<Option<MonomialCertificate>> = vec![None; basis.len()];
    let mut queue = VecDeque::new();
    for (idx, exps) in &gens {
        if found[*idx].is_none() {
            found[*idx] = Some(MonomialCertificate {
                basis_index: *idx,
                label: basis[*idx].label.clone(),
                exponents: exps.clone(),
                depth: 1,
            });
            queue.push_back(*idx);
        }
    }
    while let Some(a) = queue.pop_front() {
        let cert = found[a].clone().expect("queued elements are certified");
        for (g, gexp) in &gens {
            let Some(entry) = table.get(a, *g) else { continue };
            if found[entry.index].is_some() {
                continue;
            }
            let exponents = cert.exponents.iter().zip(gexp).map(|(x, y)| x + y).collect();
            found[entry.index] = Some(MonomialCertificate {
                basis_index: entry.index,
                label: basis[entry.index].label.clone(),
                exponents,
                depth: cert.depth + 1,
            });
            queue.push_back(entry.index);
        }
    }
    Ok(found.into_iter().flatten().collect())
}

/// Rank of a list of elements under the inner product (helper for tests and covers).
pub fn span_rank(elements: &[AlgebraElement]) -> usize {
    let mut span = Span::new(CLOSURE_TOL);
    elements.iter().filter(|e| span.insert(e)).count()
}

/// Coordinates of `e` over an orthogonal basis.
pub fn coordinates(e: &AlgebraElement, basis: &[AlgebraElement]) -> Result<Vec<f64>> {
    basis
        .iter()
        .map(|b| Ok(inner_product(b, e)? / inner_product(b, b)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::{so3_axes, BasisKind};
    use crate::spec::rotation_spec;

    fn so_elems(n: usize, pairs: &[(usize, usize)]) -> Vec<AlgebraElement> {
        let b = standard_basis(Algebra::So(n)).unwrap();
        pairs
            .iter()
            .map(|&(i, j)| {
                let k = crate::lie_core::basis_index(Algebra::So(n), BasisKind::SoRotation(i, j)).unwrap();
                b[k].element()
            })
            .collect()
    }

    #[test]
    fn closure_examples() {
        let [x, y, _] = so3_axes();
        assert_eq!(lie_closure(&[x, y], 3, CLOSURE_TOL).unwrap().dimension, 3);
        for n in 2..6 {
            assert_eq!(lie_closure(&so_elems(n, &[(0, 1)]), n * (n - 1) / 2, CLOSURE_TOL).unwrap().dimension, 1);
        }
        let g = so_elems(4, &[(0, 1), (1, 2), (2, 3)]);
        let c = lie_closure(&g, 6, CLOSURE_TOL).unwrap();
        assert_eq!(c.dimension, 6);
        // idempotent
        assert_eq!(lie_closure(&c.basis, 6, CLOSURE_TOL).unwrap().dimension, 6);
        assert!(lie_closure(&g, 6, 0.0).is_err());
    }

    #[test]
    fn classical_examples() {
        let xy = rotation_spec(Algebra::So(3), &[(1, 2, "b"), (0, 2, "b")], &[], &[("b", 1.0, 2.0, 3)]).unwrap();
        let r = check_classical(&xy).unwrap();
        assert!(r.is_controllable());
        assert_eq!((r.closure_dimension, r.algebra_dimension), (3, 3));

        let se3 = rotation_spec(Algebra::Se(3), &[(0, 1, "1"), (0, 2, "1"), (1, 2, "1")], &[], &[]).unwrap();
        let r = check_classical(&se3).unwrap();
        assert_eq!(r.obstruction, Some(Obstruction::NoTranslationChannel));

        let se2 = rotation_spec(Algebra::Se(2), &[(0, 1, "1")], &[0], &[]).unwrap();
        assert!(check_classical(&se2).unwrap().is_controllable());

        let se3_partial = rotation_spec(Algebra::Se(3), &[(0, 1, "1")], &[0], &[]).unwrap();
        let r = check_classical(&se3_partial).unwrap();
        assert_eq!(r.obstruction, Some(Obstruction::SphereIntransitive));
    }

    #[test]
    fn centers() {
        let [x, y, _] = so3_axes();
        assert!(center_of_closure(&[x, y]).unwrap().is_empty());
        let so2 = so_elems(2, &[(0, 1)]);
        let c = center_of_closure(&so2).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].matrix.clone() - so2[0].matrix.clone()).camax() < 1e-12
            || (c[0].matrix.clone() + so2[0].matrix.clone()).camax() < 1e-12);
        let se = standard_basis(Algebra::Se(2)).unwrap();
        let elems: Vec<_> = se.iter().map(|b| b.element()).collect();
        assert!(center_of_closure(&elems).unwrap().is_empty());
        // abelian pair in so(4): everything central
        assert_eq!(center_of_closure(&so_elems(4, &[(0, 1), (2, 3)])).unwrap().len(), 2);
    }

    #[test]
    fn ensemble_examples() {
        let prop = rotation_spec(
            Algebra::So(3),
            &[(1, 2, "b1"), (0, 2, "b2"), (0, 1, "b3")],
            &[],
            &[("b1", 1.0, 2.0, 2), ("b2", 1.0, 2.0, 2), ("b3", 1.0, 2.0, 2)],
        )
        .unwrap();
        assert!(check_ensemble(&prop).unwrap().is_controllable());
        let so2 = rotation_spec(Algebra::So(2), &[(0, 1, "b")], &[], &[("b", 1.0, 2.0, 3)]).unwrap();
        let classical = check_classical(&so2).unwrap();
        assert!(classical.is_controllable());
        let r = check_ensemble(&so2).unwrap();
        assert_eq!(r.obstruction, Some(Obstruction::So2Nilpotent));
        let se3 = rotation_spec(Algebra::Se(3), &[(0, 1, "b"), (1, 2, "b")], &[2], &[("b", 1.0, 2.0, 2)]).unwrap();
        assert!(check_classical(&se3).unwrap().is_controllable());
        assert!(check_ensemble(&se3).unwrap().is_controllable());
        let abelian = rotation_spec(Algebra::So(4), &[(0, 1, "b"), (2, 3, "b")], &[], &[("b", 1.0, 2.0, 2)]).unwrap();
        assert_eq!(check_ensemble(&abelian).unwrap().obstruction, Some(Obstruction::NontrivialCenter));
    }

    #[test]
    fn certificates() {
        let s = rotation_spec(Algebra::So(3), &[(0, 1, "b1"), (1, 2, "b2")], &[], &[("b1", 1.0, 2.0, 2), ("b2", 1.0, 2.0, 2)]).unwrap();
        let c = monomial_certificates(&s).unwrap();
        let o13 = c.iter().find(|m| m.label == "O_13").unwrap();
        assert_eq!(o13.exponents, vec![1, 1]);
        let o12 = c.iter().find(|m| m.label == "O_12").unwrap();
        assert_eq!(o12.exponents, vec![1, 0]);
        let s4 = rotation_spec(
            Algebra::So(4),
            &[(0, 1, "b1"), (1, 2, "b2"), (2, 3, "b3")],
            &[],
            &[("b1", 1.0, 2.0, 2), ("b2", 1.0, 2.0, 2), ("b3", 1.0, 2.0, 2)],
        )
        .unwrap();
        let c = monomial_certificates(&s4).unwrap();
        assert_eq!(c.len(), 6);
        let o14 = c.iter().find(|m| m.label == "O_14").unwrap();
        assert_eq!(o14.exponents, vec![1, 1, 1]);
    }
}
