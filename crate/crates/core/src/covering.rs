//! Covers of so(n) by so(3)-type triples, spin-triple certification and
//! su(2) triples built from root data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::larc::{lie_closure, span_rank, CLOSURE_TOL};
use crate::lie_core::{
    basis_index, bracket, inner_product, standard_basis, Algebra, AlgebraElement, BasisElement,
    BasisKind, CMat,
};

/// Relabeling that turns a triple into a spin triple:
/// E_k = signs[k]·B_{order[k]} satisfies [E_1,E_2] = s·E_3 and cyclically,
/// with common scale s > 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinCertificate {
    pub order: [usize; 3],
    pub signs: [f64; 3],
    pub scale: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverTriple {
    /// Basis indices in emitted order.
    pub indices: [usize; 3],
    pub certificate: SpinCertificate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub algebra: Algebra,
    pub basis: Vec<BasisElement>,
    pub triples: Vec<CoverTriple>,
}

impl Cover {
    pub fn labels(&self, t: &CoverTriple) -> [String; 3] {
        t.indices.map(|i| self.basis[i].label.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Full,
    Minimal,
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks [B1,B2] = s·B3, [B2,B3] = s·B1, [B3,B1] = s·B2 for one common s > 0.
pub fn spin_triple_check(
    b1: &AlgebraElement,
    b2: &AlgebraElement,
    b3: &AlgebraElement,
    tol: f64,
) -> Result<SpinCertificate> {
    let b = [b1, b2, b3];
    let names = ["[B1,B2] = B3", "[B2,B3] = B1", "[B3,B1] = B2"];
    let rel = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
    let mut brackets = Vec::with_capacity(3);
    let (mut num, mut den) = (0.0, 0.0);
    for &(i, j, k) in &rel {
        let c = bracket(b[i], b[j])?;
        num += inner_product(b[k], &c)?;
        den += inner_product(b[k], b[k])?;
        brackets.push(c);
    }
    if den == 0.0 {
        return Err(Error::SpinTriple { relation: names[0].into(), residual: f64::INFINITY });
    }
    let scale = num / den;
    let mut worst = 0.0f64;
    for (r, &(_, _, k)) in rel.iter().enumerate() {
        let resid = max_abs(&(&brackets[r].matrix - &b[k].matrix * Complex64::new(scale, 0.0)));
        if resid > tol || scale <= tol {
            return Err(Error::SpinTriple { relation: names[r].into(), residual: resid.max(tol) });
        }
        worst = worst.max(resid);
    }
    Ok(SpinCertificate { order: [0, 1, 2], signs: [1.0; 3], scale, residual: worst })
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Searches orderings and signs for a cyclic spin relabeling of the triple.
pub fn normalize_triple(elems: [&AlgebraElement; 3], tol: f64) -> Result<SpinCertificate> {
    let mut last = None;
    for order in PERMS {
        for mask in 0..8u32 {
            let signs = [0, 1, 2].map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 });
            let e = [0, 1, 2].map(|k| elems[order[k]].scale(signs[k]));
            match spin_triple_check(&e[0], &e[1], &e[2], tol) {
                Ok(mut c) => {
                    c.order = order;
                    c.signs = signs;
                    return Ok(c);
                }
                Err(err) => last = Some(err),
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

fn so_index(n: usize, a: usize, b: usize) -> usize {
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    basis_index(Algebra::So(n), BasisKind::SoRotation(i, j)).expect("valid pair")
}

fn make_triple(basis: &[BasisElement], indices: [usize; 3]) -> Result<CoverTriple> {
    let e = indices.map(|i| basis[i].element());
    let certificate = normalize_triple([&e[0], &e[1], &e[2]], 1e-12)?;
    Ok(CoverTriple { indices, certificate })
}

/// Cover of so(n) by coordinate so(3) subalgebras.
///
/// Full mode lists, for every pair (i,j), the n−2 triples {Ω_ij, Ω_ik, Ω_kj}.
/// Minimal mode lists each coordinate so(3) once, one per index set i<j<k.
pub fn cover_so_n(n: usize, mode: CoverMode) -> Result<Cover> {
    if n < 3 {
        return Err(Error::InvalidDimension(format!("so({n}) has no so(3) subalgebra")));
    }
    let algebra = Algebra::So(n);
    let basis = standard_basis(algebra)?;
    let mut triples = Vec::new();
    match mode {
        CoverMode::Full => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in (0..n).filter(|&k| k != i && k != j) {
                        let idx = [so_index(n, i, j), so_index(n, i, k), so_index(n, k, j)];
                        triples.push(make_triple(&basis, idx)?);
                    }
                }
            }
        }
        CoverMode::Minimal => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let idx = [so_index(n, i, j), so_index(n, i, k), so_index(n, j, k)];
                        triples.push(make_triple(&basis, idx)?);
                    }
                }
            }
        }
    }
    let cover = Cover { algebra, basis, triples };
    validate_cover(&cover)?;
    Ok(cover)
}

fn validate_cover(cover: &Cover) -> Result<()> {
    let mut union = Vec::new();
    for t in &cover.triples {
        let e: Vec<AlgebraElement> = t.indices.iter().map(|&i| cover.basis[i].element()).collect();
        let dim = lie_closure(&e, 3, CLOSURE_TOL)?.dimension;
        if dim != 3 {
            return Err(Error::Internal(format!("triple closure has dimension {dim}")));
        }
        union.extend(e);
    }
    let all: Vec<AlgebraElement> = cover.basis.iter().map(|b| b.element()).collect();
    let rank = span_rank(&union);
    if rank < all.len() {
        let mut probe = union.clone();
        for (b, e) in cover.basis.iter().zip(&all) {
            probe.push(e.clone());
            if span_rank(&probe) > rank {
                return Err(Error::CoverIncomplete { witness: b.label.clone() });
            }
            probe.pop();
        }
    }
    Ok(())
}

/// Validates user-supplied triples over a basis.
pub fn cover_from_triples(basis: &[BasisElement], triples: &[[usize; 3]]) -> Result<Cover> {
    let Some(first) = basis.first() else {
        return Err(Error::Spec("empty basis".into()));
    };
    let mut out = Vec::with_capacity(triples.len());
    for t in triples {
        if t.iter().any(|&i| i >= basis.len()) {
            return Err(Error::Spec(format!("triple {t:?} indexes outside the basis")));
        }
        out.push(make_triple(basis, *t)?);
    }
    let cover = Cover { algebra: first.algebra, basis: basis.to_vec(), triples: out };
    validate_cover(&cover)?;
    Ok(cover)
}

/// Coroot H and root vector X of an sl(2)-triple; the partner is Y = X†.
#[derive(Clone, Debug, PartialEq)]
pub struct RootDatum {
    pub h: CMat,
    pub x: CMat,
}

impl RootDatum {
    /// Y = −σ(X) for the compact-form conjugation σ(A) = −A†.
    pub fn y(&self) -> CMat {
        self.x.adjoint()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        if self.h.shape() != self.x.shape() || self.h.nrows() != self.h.ncols() {
            return Err(Error::Shape("root datum matrices differ in shape".into()));
        }
        let (h, x, y) = (&self.h, &self.x, self.y());
        let two = Complex64::new(2.0, 0.0);
        let checks = [
            ("[H,X] = 2X", h * x - x * h - x * two),
            ("[H,Y] = -2Y", h * &y - &y * h + &y * two),
            ("[X,Y] = H", x * &y - &y * x - h),
        ];
        let scale = max_abs(h).max(max_abs(x)).max(1.0);
        for (name, r) in checks {
            let residual = max_abs(&r);
            if residual > tol * scale {
                return Err(Error::RootData { relation: name.into(), residual });
            }
        }
        Ok(())
    }
}

/// B1 = iH/2, B2 = i(X+Y)/2, B3 = (Y−X)/2.
pub fn su2_triple_from_root(datum: &RootDatum) -> Result<[AlgebraElement; 3]> {
    datum.check(1e-10)?;
    let d = datum.h.nrows();
    let a = Algebra::Generic(d);
    let y = datum.y();
    let half_i = Complex64::new(0.0, 0.5);
    let half = Complex64::new(0.5, 0.0);
    let out = [
        AlgebraElement::new(a, &datum.h * half_i),
        AlgebraElement::new(a, (&datum.x + &y) * half_i),
        AlgebraElement::new(a, (&y - &datum.x) * half),
    ];
    spin_triple_check(&out[0], &out[1], &out[2], 1e-10)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_core::so3_axes;
    use std::collections::BTreeSet;

    fn as_sets(c: &Cover) -> BTreeSet<BTreeSet<String>> {
        c.triples.iter().map(|t| c.labels(t).into_iter().collect()).collect()
    }

    #[test]
    fn example_cover_of_so4() {
        let c = cover_so_n(4, CoverMode::Minimal).unwrap();
        let want: BTreeSet<BTreeSet<String>> = [
            ["O_12", "O_13", "O_23"],
            ["O_12", "O_24", "O_14"],
            ["O_13", "O_14", "O_34"],
            ["O_23", "O_34", "O_24"],
        ]
        .iter()
        .map(|t| t.iter().map(|s| s.to_string()).collect())
        .collect();
        assert_eq!(as_sets(&c), want);
    }

    #[test]
    fn cover_sizes() {
        assert_eq!(cover_so_n(3, CoverMode::Minimal).unwrap().triples.len(), 1);
        assert_eq!(cover_so_n(5, CoverMode::Full).unwrap().triples.len(), 30);
        assert!(matches!(cover_so_n(2, CoverMode::Full), Err(Error::InvalidDimension(_))));
        for n in 3..7 {
            let full = as_sets(&cover_so_n(n, CoverMode::Full).unwrap());
            let min = as_sets(&cover_so_n(n, CoverMode::Minimal).unwrap());
            assert!(min.is_subset(&full));
        }
    }

    #[test]
    fn so_triples_have_unit_scale() {
        for t in cover_so_n(5, CoverMode::Full).unwrap().triples {
            assert_eq!(t.certificate.scale, 1.0);
        }
    }

    #[test]
    fn spin_checks() {
        let su = standard_basis(Algebra::Su2).unwrap();
        let e: Vec<_> = su.iter().map(|b| b.element()).collect();
        let c = spin_triple_check(&e[0], &e[1], &e[2], 1e-12).unwrap();
        assert!((c.scale - 2f64.sqrt()).abs() < 1e-14);
        let [x, y, z] = so3_axes();
        assert_eq!(spin_triple_check(&x, &y, &z, 1e-12).unwrap().scale, 1.0);
        let err = spin_triple_check(&e[0], &e[1], &e[2].scale(2.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::SpinTriple { ref relation, .. } if relation == "[B1,B2] = B3"));
    }

    #[test]
    fn root_triples() {
        let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        let mut x = CMat::zeros(2, 2);
        x[(0, 1)] = Complex64::new(1.0, 0.0);
        let t = su2_triple_from_root(&RootDatum { h: h.clone(), x: x.clone() }).unwrap();
        let c = spin_triple_check(&t[0], &t[1], &t[2], 1e-12).unwrap();
        assert!((c.scale - 1.0).abs() < 1e-15);
        let bad = RootDatum { h: h * Complex64::new(0.5, 0.0), x };
        assert!(matches!(su2_triple_from_root(&bad), Err(Error::RootData { ref relation, .. }) if relation == "[H,X] = 2X"));
    }

    #[test]
    fn user_triples() {
        let basis = standard_basis(Algebra::So(4)).unwrap();
        let idx = |i, j| so_index(4, i, j);
        let b1 = [idx(0, 1), idx(0, 2), idx(1, 2)];
        let b2 = [idx(0, 1), idx(1, 3), idx(0, 3)];
        let b3 = [idx(0, 2), idx(0, 3), idx(2, 3)];
        let b4 = [idx(1, 2), idx(2, 3), idx(1, 3)];
        assert!(cover_from_triples(&basis, &[b1, b2, b3, b4]).is_ok());
        let err = cover_from_triples(&basis, &[b1, b2]).unwrap_err();
        assert_eq!(err, Error::CoverIncomplete { witness: "O_34".into() });
        let so3 = standard_basis(Algebra::So(3)).unwrap();
        assert!(cover_from_triples(&so3, &[[0, 1, 2]]).is_ok());
    }
}
