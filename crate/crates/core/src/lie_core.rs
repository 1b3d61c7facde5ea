//! Matrix Lie algebra and group primitives: standard bases, brackets,
//! structure tables, the trace inner product, exp/log and the bi-invariant
//! metric.
//!
//! Every matrix is stored as a dense complex matrix. Real algebras (so, se)
//! simply carry zero imaginary parts, which keeps integer-valued brackets exact.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Distance from the cut locus below which the principal logarithm is refused.
pub const CUT_LOCUS_TOL: f64 = 1e-8;

/// Which algebra (or group) a matrix belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algebra {
    So(usize),
    Se(usize),
    Su2,
    Generic(usize),
}

impl Algebra {
    /// Side length of the matrices realizing this algebra.
    pub fn matrix_size(&self) -> usize {
        match *self {
            Algebra::So(n) => n,
            Algebra::Se(n) => n + 1,
            Algebra::Su2 => 2,
            Algebra::Generic(d) => d,
        }
    }

    /// Dimension of the algebra as a real vector space (None for generic).
    pub fn dimension(&self) -> Option<usize> {
        match *self {
            Algebra::So(n) => Some(n * (n - 1) / 2),
            Algebra::Se(n) => Some(n * (n - 1) / 2 + n),
            Algebra::Su2 => Some(3),
            Algebra::Generic(_) => None,
        }
    }

    /// Weight w in the inner product w·Re tr(A†B).
    ///
    /// Half trace on real algebras makes the Ω_ij orthonormal; the full trace on
    /// su(2) does the same for the 1/√2-scaled spin basis.
    pub fn trace_weight(&self) -> f64 {
        match self {
            Algebra::Su2 => 1.0,
            _ => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    SoRotation(usize, usize),
    SeRotation(usize, usize),
    SeTranslation(usize),
    Su2Spin(usize),
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisElement {
    pub kind: BasisKind,
    pub algebra: Algebra,
    pub matrix: CMat,
    pub label: String,
}

impl BasisElement {
    pub fn element(&self) -> AlgebraElement {
        AlgebraElement::new(self.algebra, self.matrix.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    pub algebra: Algebra,
    pub matrix: CMat,
    pub coords: Option<Vec<f64>>,
}

impl AlgebraElement {
    pub fn new(algebra: Algebra, matrix: CMat) -> Self {
        AlgebraElement { algebra, matrix, coords: None }
    }

    pub fn zeros(algebra: Algebra) -> Self {
        let d = algebra.matrix_size();
        Self::new(algebra, CMat::zeros(d, d))
    }

    pub fn from_real(algebra: Algebra, m: &DMatrix<f64>) -> Self {
        Self::new(algebra, m.map(|x| Complex64::new(x, 0.0)))
    }

    /// Linear combination Σ c_k B_k, remembering the coordinates.
    pub fn from_coords(basis: &[BasisElement], coords: &[f64]) -> Result<Self> {
        if basis.is_empty() || basis.len() != coords.len() {
            return Err(Error::Shape(format!(
                "{} coordinates for {} basis elements",
                coords.len(),
                basis.len()
            )));
        }
        let mut m = CMat::zeros(basis[0].matrix.nrows(), basis[0].matrix.ncols());
        for (b, &c) in basis.iter().zip(coords) {
            m += &b.matrix * Complex64::new(c, 0.0);
        }
        let mut e = Self::new(basis[0].algebra, m);
        e.coords = Some(coords.to_vec());
        Ok(e)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.algebra, &self.matrix * Complex64::new(c, 0.0))
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<Self> {
        same_shape(&self.matrix, &other.matrix)?;
        Ok(Self::new(self.algebra, &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<Self> {
        same_shape(&self.matrix, &other.matrix)?;
        Ok(Self::new(self.algebra, &self.matrix - &other.matrix))
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self).unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// Real vector whose Euclidean dot product equals [`inner_product`].
    pub fn flatten(&self) -> Vec<f64> {
        let s = self.algebra.trace_weight().sqrt();
        let mut v = Vec::with_capacity(2 * self.matrix.len());
        for z in self.matrix.iter() {
            v.push(s * z.re);
            v.push(s * z.im);
        }
        v
    }

    /// Checks the defining invariants of the declared algebra to `tol`.
    pub fn check_membership(&self, tol: f64) -> Result<()> {
        let d = self.algebra.matrix_size();
        if self.matrix.nrows() != d || self.matrix.ncols() != d {
            return Err(Error::Shape(format!(
                "{}x{} matrix in an algebra of {}x{} matrices",
                self.matrix.nrows(),
                self.matrix.ncols(),
                d,
                d
            )));
        }
        let skew = |m: &CMat| (m + m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        match self.algebra {
            Algebra::So(_) => {
                if !self.is_real() || skew(&self.matrix) > tol {
                    return Err(Error::Spec("matrix is not real skew-symmetric".into()));
                }
            }
            Algebra::Se(n) => {
                let block = self.matrix.view((0, 0), (n, n)).into_owned();
                let last_row = self.matrix.row(n).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if !self.is_real() || skew(&block) > tol || last_row > tol {
                    return Err(Error::Spec("matrix is not in se(n) block form".into()));
                }
            }
            Algebra::Su2 => {
                if skew(&self.matrix) > tol || self.matrix.trace().norm() > tol {
                    return Err(Error::Spec("matrix is not traceless skew-Hermitian".into()));
                }
            }
            Algebra::Generic(_) => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub group: Algebra,
    pub matrix: CMat,
}

impl GroupElement {
    pub fn identity(group: Algebra) -> Self {
        let d = group.matrix_size();
        GroupElement { group, matrix: CMat::identity(d, d) }
    }

    pub fn from_real(group: Algebra, m: &DMatrix<f64>) -> Self {
        GroupElement { group, matrix: m.map(|x| Complex64::new(x, 0.0)) }
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        same_shape(&self.matrix, &other.matrix)?;
        Ok(GroupElement { group: self.group, matrix: &self.matrix * &other.matrix })
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        match self.group {
            Algebra::So(_) | Algebra::Su2 => {
                Ok(GroupElement { group: self.group, matrix: self.matrix.adjoint() })
            }
            Algebra::Se(n) => {
                let r = self.rotation_block();
                let x = self.translation();
                let rt = r.transpose();
                let y = -(&rt * x);
                let mut m = DMatrix::<f64>::identity(n + 1, n + 1);
                m.view_mut((0, 0), (n, n)).copy_from(&rt);
                m.view_mut((0, n), (n, 1)).copy_from(&y);
                Ok(GroupElement::from_real(self.group, &m))
            }
            Algebra::Generic(_) => self
                .matrix
                .clone()
                .try_inverse()
                .map(|m| GroupElement { group: self.group, matrix: m })
                .ok_or_else(|| Error::Numeric("singular group element".into())),
        }
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }

    /// Rotation block of an SE(n) element (the whole matrix otherwise).
    pub fn rotation_block(&self) -> DMatrix<f64> {
        match self.group {
            Algebra::Se(n) => self.real_part().view((0, 0), (n, n)).into_owned(),
            _ => self.real_part(),
        }
    }

    /// Translation column of an SE(n) element (empty otherwise).
    pub fn translation(&self) -> nalgebra::DVector<f64> {
        match self.group {
            Algebra::Se(n) => self.real_part().view((0, n), (n, 1)).column(0).into_owned(),
            _ => nalgebra::DVector::zeros(0),
        }
    }

    /// Largest violation of the group's defining equations.
    pub fn invariant_residual(&self) -> f64 {
        let maxabs = |m: &CMat| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        match self.group {
            Algebra::So(n) => {
                let m = &self.matrix;
                let orth = maxabs(&(m.adjoint() * m - CMat::identity(n, n)));
                let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                let det = (self.real_part().determinant() - 1.0).abs();
                orth.max(imag).max(det)
            }
            Algebra::Se(n) => {
                let r = GroupElement::from_real(Algebra::So(n), &self.rotation_block());
                let mut last = 0.0f64;
                for j in 0..=n {
                    let want = if j == n { C1 } else { C0 };
                    last = last.max((self.matrix[(n, j)] - want).norm());
                }
                r.invariant_residual().max(last)
            }
            Algebra::Su2 => {
                let m = &self.matrix;
                let unit = maxabs(&(m.adjoint() * m - CMat::identity(2, 2)));
                unit.max((m.determinant() - C1).norm())
            }
            Algebra::Generic(_) => 0.0,
        }
    }
}

fn same_shape(a: &CMat, b: &CMat) -> Result<()> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn unit_skew(size: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(size, size);
    m[(i, j)] = C1;
    m[(j, i)] = -C1;
    m
}

/// The spin basis of su(2): Pauli matrices scaled by i/√2.
pub fn su2_spin_matrices() -> [CMat; 3] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, h);
    let r = Complex64::new(h, 0.0);
    [
        CMat::from_row_slice(2, 2, &[C0, i, i, C0]),
        CMat::from_row_slice(2, 2, &[C0, -r, r, C0]),
        CMat::from_row_slice(2, 2, &[i, C0, C0, -i]),
    ]
}

/// Ordered standard basis; `n` is the matrix group parameter (ignored for su(2)).
pub fn standard_basis(algebra: Algebra) -> Result<Vec<BasisElement>> {
    match algebra {
        Algebra::So(n) | Algebra::Se(n) if n < 2 => {
            Err(Error::InvalidDimension(format!("n = {n}, need n >= 2")))
        }
        Algebra::So(n) => {
            let mut out = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    out.push(BasisElement {
                        kind: BasisKind::SoRotation(i, j),
                        algebra,
                        matrix: unit_skew(n, i, j),
                        label: format!("O_{}{}", i + 1, j + 1),
                    });
                }
            }
            Ok(out)
        }
        Algebra::Se(n) => {
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    out.push(BasisElement {
                        kind: BasisKind::SeRotation(i, j),
                        algebra,
                        matrix: unit_skew(n + 1, i, j),
                        label: format!("R_{}{}", i + 1, j + 1),
                    });
                }
            }
            for k in 0..n {
                let mut m = CMat::zeros(n + 1, n + 1);
                m[(k, n)] = C1;
                out.push(BasisElement {
                    kind: BasisKind::SeTranslation(k),
                    algebra,
                    matrix: m,
                    label: format!("T_{}", k + 1),
                });
            }
            Ok(out)
        }
        Algebra::Su2 => Ok(su2_spin_matrices()
            .into_iter()
            .enumerate()
            .map(|(k, m)| BasisElement {
                kind: BasisKind::Su2Spin(k + 1),
                algebra,
                matrix: m,
                label: format!("B_{}", k + 1),
            })
            .collect()),
        Algebra::Generic(_) => {
            Err(Error::InvalidDimension("generic algebras have no standard basis".into()))
        }
    }
}

/// Position of a standard-basis element of so(n)/se(n) by its kind.
pub fn basis_index(algebra: Algebra, kind: BasisKind) -> Option<usize> {
    let pair = |n: usize, i: usize, j: usize| {
        if i < j && j < n {
            Some(i * n - i * (i + 1) / 2 + (j - i - 1))
        } else {
            None
        }
    };
    match (algebra, kind) {
        (Algebra::So(n), BasisKind::SoRotation(i, j)) => pair(n, i, j),
        (Algebra::Se(n), BasisKind::SeRotation(i, j)) => pair(n, i, j),
        (Algebra::Se(n), BasisKind::SeTranslation(k)) if k < n => Some(n * (n - 1) / 2 + k),
        (Algebra::Su2, BasisKind::Su2Spin(k)) if (1..=3).contains(&k) => Some(k - 1),
        _ => None,
    }
}

/// The rotation-axis chart (Ω_x, Ω_y, Ω_z) of so(3) with [Ω_x, Ω_y] = Ω_z.
pub fn so3_axes() -> [AlgebraElement; 3] {
    let a = Algebra::So(3);
    [
        AlgebraElement::new(a, -unit_skew(3, 1, 2)),
        AlgebraElement::new(a, unit_skew(3, 0, 2)),
        AlgebraElement::new(a, -unit_skew(3, 0, 1)),
    ]
}

pub fn bracket(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    same_shape(&a.matrix, &b.matrix)?;
    let algebra = if a.algebra == b.algebra {
        a.algebra
    } else {
        Algebra::Generic(a.matrix.nrows())
    };
    Ok(AlgebraElement::new(algebra, &a.matrix * &b.matrix - &b.matrix * &a.matrix))
}

pub fn inner_product(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    same_shape(&a.matrix, &b.matrix)?;
    let s: f64 = a.matrix.iter().zip(b.matrix.iter()).map(|(x, y)| (x.conj() * y).re).sum();
    Ok(a.algebra.trace_weight() * s)
}

/// One entry of a structure table: [B_a, B_b] = coeff · B_index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub index: usize,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureTable {
    pub dim: usize,
    entries: Vec<Option<TableEntry>>,
}

impl StructureTable {
    pub fn get(&self, a: usize, b: usize) -> Option<TableEntry> {
        self.entries[a * self.dim + b]
    }

    /// Signed 1-based index (+k, −k) or 0, for tables with unit coefficients.
    pub fn signed_index(&self, a: usize, b: usize) -> i64 {
        match self.get(a, b) {
            None => 0,
            Some(e) => e.coeff.signum() as i64 * (e.index as i64 + 1),
        }
    }
}

/// Tabulates pairwise brackets of a basis whose brackets are multiples of
/// single basis elements.
pub fn structure_table(basis: &[BasisElement]) -> Result<StructureTable> {
    let dim = basis.len();
    let elems: Vec<AlgebraElement> = basis.iter().map(|b| b.element()).collect();
    let norms: Vec<f64> = elems.iter().map(|e| inner_product(e, e)).collect::<Result<_>>()?;
    let mut entries = vec![None; dim * dim];
    for a in 0..dim {
        for b in a + 1..dim {
            let c = bracket(&elems[a], &elems[b])?;
            let scale = c.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if scale <= 1e-12 {
                continue;
            }
            let mut found = None;
            for (k, e) in elems.iter().enumerate() {
                let coeff = inner_product(e, &c)? / norms[k];
                if coeff.abs() <= 1e-12 {
                    continue;
                }
                let resid = (&c.matrix - &e.matrix * Complex64::new(coeff, 0.0))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if resid <= 1e-12 * scale.max(1.0) {
                    let coeff = if (coeff.abs() - 1.0).abs() <= 1e-12 { coeff.signum() } else { coeff };
                    found = Some(TableEntry { index: k, coeff });
                }
                break;
            }
            let entry = found.ok_or_else(|| {
                Error::NonClosedBasis(format!("[{}, {}]", basis[a].label, basis[b].label))
            })?;
            entries[a * dim + b] = Some(entry);
            entries[b * dim + a] = Some(TableEntry { index: entry.index, coeff: -entry.coeff });
        }
    }
    Ok(StructureTable { dim, entries })
}

/// Matrix exponential via scaling-and-squaring Padé, on the real
/// representation when the input is real.
pub fn expm(a: &AlgebraElement) -> Result<GroupElement> {
    if a.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite entry in exponent".into()));
    }
    let matrix = if a.is_real() {
        a.matrix.map(|z| z.re).exp().map(|x| Complex64::new(x, 0.0))
    } else {
        a.matrix.clone().exp()
    };
    Ok(GroupElement { group: a.algebra, matrix })
}

/// Real exponential used on hot paths.
pub fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

struct AngleSpectrum {
    vectors: CMat,
    angles: Vec<f64>,
    sines: Vec<f64>,
    skew: CMat,
}

/// Rotation angles of a unitary U from the Hermitian part S = (U+U†)/2 and the
/// skew part K: each eigenvector v of S has angle atan2(‖Kv‖, λ).
fn angle_spectrum(u: &CMat) -> AngleSpectrum {
    let s = (u + u.adjoint()) * Complex64::new(0.5, 0.0);
    let skew = (u - u.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(s);
    let n = u.nrows();
    let mut angles = Vec::with_capacity(n);
    let mut sines = Vec::with_capacity(n);
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let sk = (&skew * v).norm();
        angles.push(sk.atan2(eig.eigenvalues[k]));
        sines.push(sk);
    }
    AngleSpectrum { vectors: eig.eigenvectors, angles, sines, skew }
}

fn unitary_group(x: &GroupElement) -> Result<()> {
    match x.group {
        Algebra::So(_) | Algebra::Su2 => Ok(()),
        g => Err(Error::Spec(format!("logarithm and metric are implemented for SO(n) and SU(2), not {g:?}"))),
    }
}

/// Principal logarithm of an SO(n) or SU(2) element.
pub fn logm(x: &GroupElement) -> Result<AlgebraElement> {
    unitary_group(x)?;
    let spec = angle_spectrum(&x.matrix);
    let gap = spec
        .angles
        .iter()
        .map(|a| std::f64::consts::PI - a)
        .fold(f64::INFINITY, f64::min);
    if gap < CUT_LOCUS_TOL {
        return Err(Error::CutLocus { gap });
    }
    let n = x.matrix.nrows();
    let mut g = CMat::zeros(n, n);
    for k in 0..n {
        let scale = if spec.sines[k] > 0.0 { spec.angles[k] / spec.sines[k] } else { 1.0 };
        let v = spec.vectors.column(k);
        g += (&v * v.adjoint()) * Complex64::new(scale, 0.0);
    }
    let l = &spec.skew * g;
    let mut l = (&l - l.adjoint()) * Complex64::new(0.5, 0.0);
    if let Algebra::So(_) = x.group {
        l = l.map(|z| Complex64::new(z.re, 0.0));
    } else {
        let tr = l.trace() / Complex64::new(n as f64, 0.0);
        for i in 0..n {
            l[(i, i)] -= tr;
        }
    }
    Ok(AlgebraElement::new(x.group, l))
}

/// Bi-invariant distance ‖log(X†Y)‖; at the cut locus the angle spectrum of
/// X†Y gives the same length without a branch choice.
pub fn geodesic_distance(x: &GroupElement, y: &GroupElement) -> Result<f64> {
    unitary_group(x)?;
    if x.group != y.group {
        return Err(Error::Shape(format!("{:?} vs {:?}", x.group, y.group)));
    }
    same_shape(&x.matrix, &y.matrix)?;
    let m = GroupElement { group: x.group, matrix: x.matrix.adjoint() * &y.matrix };
    match logm(&m) {
        Ok(l) => Ok(l.norm()),
        Err(Error::CutLocus { .. }) => {
            let spec = angle_spectrum(&m.matrix);
            let sq: f64 = spec.angles.iter().map(|a| a * a).sum();
            Ok((x.group.trace_weight() * sq).sqrt())
        }
        Err(e) => Err(e),
    }
}

/// Group-valued function sampled on a parameter grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    pub grid: Vec<Vec<f64>>,
    pub states: Vec<GroupElement>,
}

pub fn ensemble_distance(f: &EnsembleState, g: &EnsembleState) -> Result<f64> {
    if f.grid != g.grid || f.states.len() != f.grid.len() || g.states.len() != g.grid.len() {
        return Err(Error::Grid("ensemble states are sampled on different grids".into()));
    }
    let mut sup = 0.0f64;
    for (a, b) in f.states.iter().zip(&g.states) {
        sup = sup.max(geodesic_distance(a, b)?);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn so(n: usize) -> Vec<BasisElement> {
        standard_basis(Algebra::So(n)).unwrap()
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = so(3);
        let labels: Vec<_> = b.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["O_12", "O_13", "O_23"]);
        let se = standard_basis(Algebra::Se(2)).unwrap();
        let labels: Vec<_> = se.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["R_12", "T_1", "T_2"]);
        assert_eq!(so(2).len(), 1);
        assert!(matches!(standard_basis(Algebra::So(1)), Err(Error::InvalidDimension(_))));
        for n in 2..7 {
            for (k, e) in so(n).iter().enumerate() {
                assert_eq!(basis_index(Algebra::So(n), e.kind), Some(k));
            }
            let se = standard_basis(Algebra::Se(n)).unwrap();
            for (k, e) in se.iter().enumerate() {
                assert_eq!(basis_index(Algebra::Se(n), e.kind), Some(k));
            }
        }
    }

    #[test]
    fn bracket_examples() {
        let b = so(4);
        let o = |i: usize, j: usize| b[basis_index(Algebra::So(4), BasisKind::SoRotation(i, j)).unwrap()].element();
        assert_eq!(bracket(&o(0, 1), &o(1, 2)).unwrap().matrix, o(0, 2).matrix);
        assert!(bracket(&o(0, 1), &o(2, 3)).unwrap().matrix.iter().all(|z| *z == C0));
        assert_eq!(bracket(&o(0, 2), &o(1, 2)).unwrap().matrix, -o(0, 1).matrix);
        let se = standard_basis(Algebra::Se(2)).unwrap();
        assert_eq!(bracket(&se[0].element(), &se[2].element()).unwrap().matrix, se[1].matrix);
        let err = bracket(&o(0, 1), &se[0].element());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn so3_chart_is_cyclic() {
        let [x, y, z] = so3_axes();
        assert_eq!(bracket(&x, &y).unwrap().matrix, z.matrix);
        assert_eq!(bracket(&y, &z).unwrap().matrix, x.matrix);
        assert_eq!(bracket(&z, &x).unwrap().matrix, y.matrix);
    }

    #[test]
    fn tables() {
        let t = structure_table(&so(3)).unwrap();
        // [O_12, O_13] = -O_23
        assert_eq!(t.signed_index(0, 1), -3);
        assert_eq!(t.signed_index(1, 0), 3);
        let se = structure_table(&standard_basis(Algebra::Se(2)).unwrap()).unwrap();
        assert_eq!(se.signed_index(1, 2), 0);
        let su = structure_table(&standard_basis(Algebra::Su2).unwrap()).unwrap();
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let e = su.get(a, b).unwrap();
            assert_eq!(e.index, c);
            assert!((e.coeff - 2f64.sqrt()).abs() < 1e-14);
        }
        let mut bad = so(3);
        bad[2].matrix *= Complex64::new(2.0, 0.0);
        bad[1].matrix *= Complex64::new(3.0, 0.0);
        bad.truncate(2);
        assert!(matches!(structure_table(&bad), Err(Error::NonClosedBasis(_))));
    }

    #[test]
    fn inner_products() {
        let b = so(3);
        assert_eq!(inner_product(&b[0].element(), &b[0].element()).unwrap(), 1.0);
        assert_eq!(inner_product(&b[0].element(), &b[1].element()).unwrap(), 0.0);
        let su = standard_basis(Algebra::Su2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v = inner_product(&su[i].element(), &su[j].element()).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_and_log_examples() {
        let b = so(2);
        let id = expm(&AlgebraElement::zeros(Algebra::So(3))).unwrap();
        assert_eq!(id.matrix, CMat::identity(3, 3));
        let r = expm(&b[0].element().scale(PI / 2.0)).unwrap().real_part();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((r - want).camax() < 1e-15);
        let [x, _, _] = so3_axes();
        let p = expm(&x.scale(1.234)).unwrap().mul(&expm(&x.scale(-1.234)).unwrap()).unwrap();
        assert!((p.matrix - CMat::identity(3, 3)).camax() < 1e-12);
        let l = logm(&GroupElement::identity(Algebra::So(3))).unwrap();
        assert!(l.matrix.camax() < 1e-15);
        let o13 = so(3)[1].element().scale(0.7);
        let back = logm(&expm(&o13).unwrap()).unwrap();
        assert!((back.matrix - o13.matrix).camax() < 1e-9);
        let cut = logm(&expm(&b[0].element().scale(PI)).unwrap());
        assert!(matches!(cut, Err(Error::CutLocus { .. })));
    }

    #[test]
    fn distance_examples() {
        let b = so(3);
        let i3 = GroupElement::identity(Algebra::So(3));
        assert_eq!(geodesic_distance(&i3, &i3).unwrap(), 0.0);
        for th in [0.3, -1.1, 2.9, 3.1] {
            let y = expm(&b[0].element().scale(th)).unwrap();
            assert!((geodesic_distance(&i3, &y).unwrap() - th.abs()).abs() < 1e-10);
        }
        // exactly at the cut locus the spectrum fallback still gives π
        let y = expm(&b[0].element().scale(PI)).unwrap();
        assert!((geodesic_distance(&i3, &y).unwrap() - PI).abs() < 1e-7);
        let grid = vec![vec![0.1], vec![0.5]];
        let f = EnsembleState { grid: grid.clone(), states: vec![i3.clone(), i3.clone()] };
        let g = EnsembleState {
            grid: grid.clone(),
            states: grid.iter().map(|p| expm(&b[0].element().scale(p[0])).unwrap()).collect(),
        };
        assert!((ensemble_distance(&f, &g).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(ensemble_distance(&f, &f).unwrap(), 0.0);
        let h = EnsembleState { grid: vec![vec![0.1], vec![0.6]], states: g.states.clone() };
        assert!(matches!(ensemble_distance(&f, &h), Err(Error::Grid(_))));
    }

    #[test]
    fn su2_log_round_trip() {
        let su = standard_basis(Algebra::Su2).unwrap();
        let a = AlgebraElement::from_coords(&su, &[0.4, -1.2, 0.9]).unwrap();
        let u = expm(&a).unwrap();
        assert!(u.invariant_residual() < 1e-12);
        let back = logm(&u).unwrap();
        assert!((back.matrix - a.matrix).camax() < 1e-9);
    }

    #[test]
    fn membership_checks() {
        let good = so(3)[0].element();
        assert!(good.check_membership(1e-12).is_ok());
        let mut bad = good.clone();
        bad.matrix[(0, 0)] = C1;
        assert!(bad.check_membership(1e-12).is_err());
        let se = standard_basis(Algebra::Se(3)).unwrap();
        for e in &se {
            assert!(e.element().check_membership(0.0).is_ok());
        }
    }

    #[test]
    fn se_inverse() {
        let se = standard_basis(Algebra::Se(3)).unwrap();
        let a = AlgebraElement::from_coords(&se, &[0.3, -0.2, 0.5, 1.0, 2.0, -1.0]).unwrap();
        let g = expm(&a).unwrap();
        assert!(g.invariant_residual() < 1e-12);
        let p = g.mul(&g.inverse().unwrap()).unwrap();
        assert!((p.matrix - CMat::identity(4, 4)).camax() < 1e-12);
    }
}
