//! System specifications: generators with parameter monomials, translation
//! channels, the parameter box, and the JSON file schema.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::{basis_index, standard_basis, Algebra, BasisElement, BasisKind, CMat};

/// Positive coefficient function c·Π β_l^{e_l} attached to a generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamExpr {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl ParamExpr {
    pub fn constant(c: f64, labels: usize) -> Self {
        ParamExpr { coeff: c, exponents: vec![0; labels] }
    }

    pub fn label(index: usize, labels: usize) -> Self {
        let mut exponents = vec![0; labels];
        exponents[index] = 1;
        ParamExpr { coeff: 1.0, exponents }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(point)
            .fold(self.coeff, |acc, (&e, &b)| acc * b.powi(e as i32))
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Parses `"b"`, `"b1*b2^3"`, `"0.5*b"` against the known labels.
    pub fn parse(text: &str, labels: &[String]) -> Result<Self> {
        let mut out = ParamExpr::constant(1.0, labels.len());
        for factor in text.split('*').map(str::trim) {
            if factor.is_empty() {
                return Err(Error::Spec(format!("empty factor in parameter expression {text:?}")));
            }
            if let Ok(c) = factor.parse::<f64>() {
                out.coeff *= c;
                continue;
            }
            let (name, power) = match factor.split_once('^') {
                Some((n, p)) => (
                    n.trim(),
                    p.trim()
                        .parse::<u32>()
                        .map_err(|_| Error::Spec(format!("bad exponent in {factor:?}")))?,
                ),
                None => (factor, 1),
            };
            let idx = labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::Spec(format!("unknown parameter label {name:?}")))?;
            out.exponents[idx] += power;
        }
        Ok(out)
    }

    pub fn render(&self, labels: &[String]) -> String {
        let mut parts = Vec::new();
        if self.coeff != 1.0 || self.degree() == 0 {
            parts.push(format!("{}", self.coeff));
        }
        for (l, &e) in labels.iter().zip(&self.exponents) {
            match e {
                0 => {}
                1 => parts.push(l.clone()),
                _ => parts.push(format!("{l}^{e}")),
            }
        }
        parts.join("*")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub basis: BasisElement,
    pub param: ParamExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRange {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl ParameterRange {
    pub fn samples(&self) -> Vec<f64> {
        match self.samples {
            0 => Vec::new(),
            1 => vec![0.5 * (self.min + self.max)],
            s => (0..s)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (s - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub algebra: Algebra,
    pub generators: Vec<Generator>,
    /// 0-based translation directions k_l (SE(n) only).
    pub translations: Vec<usize>,
    pub parameters: Vec<ParameterRange>,
}

impl SystemSpec {
    pub fn labels(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.label.clone()).collect()
    }

    pub fn channel_count(&self) -> usize {
        self.generators.len() + self.translations.len()
    }

    /// n for SO(n)/SE(n), 2 for SU(2).
    pub fn n(&self) -> usize {
        match self.algebra {
            Algebra::So(n) | Algebra::Se(n) => n,
            Algebra::Su2 => 2,
            Algebra::Generic(d) => d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.algebra, Algebra::Generic(_)) {
            return Err(Error::Spec("group must be SO, SE or SU2".into()));
        }
        if let Algebra::So(n) | Algebra::Se(n) = self.algebra {
            if n < 2 {
                return Err(Error::InvalidDimension(format!("n = {n}, need n >= 2")));
            }
        }
        for p in &self.parameters {
            if !(p.min > 0.0 && p.max >= p.min && p.max.is_finite()) {
                return Err(Error::Spec(format!(
                    "parameter {} must satisfy 0 < min <= max, got [{}, {}]",
                    p.label, p.min, p.max
                )));
            }
            if p.samples == 0 {
                return Err(Error::Spec(format!("parameter {} needs at least one sample", p.label)));
            }
        }
        for g in &self.generators {
            if g.basis.algebra != self.algebra {
                return Err(Error::Spec(format!("generator {} is not in {:?}", g.basis.label, self.algebra)));
            }
            g.basis.element().check_membership(1e-12)?;
            if g.param.exponents.len() != self.parameters.len() {
                return Err(Error::Spec("parameter expression arity mismatch".into()));
            }
            if !(g.param.coeff > 0.0 && g.param.coeff.is_finite()) {
                return Err(Error::Spec(format!("generator {} needs a positive coefficient", g.basis.label)));
            }
        }
        if !self.translations.is_empty() && !matches!(self.algebra, Algebra::Se(_)) {
            return Err(Error::Spec("translation channels require an SE(n) group".into()));
        }
        for &k in &self.translations {
            if k >= self.n() {
                return Err(Error::Spec(format!("translation channel {} out of range", k + 1)));
            }
        }
        Ok(())
    }

    /// Cartesian product of the per-parameter samples, last label fastest.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut grid = vec![Vec::new()];
        for p in &self.parameters {
            let s = p.samples();
            grid = grid
                .into_iter()
                .flat_map(|pt| {
                    s.iter().map(move |&v| {
                        let mut q = pt.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        grid
    }

    /// Box midpoint, used for single-system steering.
    pub fn nominal_point(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| 0.5 * (p.min + p.max)).collect()
    }

    pub fn in_box(&self, point: &[f64]) -> bool {
        point.len() == self.parameters.len()
            && self.parameters.iter().zip(point).all(|(p, &b)| b >= p.min - 1e-12 && b <= p.max + 1e-12)
    }

    /// Control matrices at a parameter point, channel order: generators then translations.
    pub fn channel_matrices(&self, point: &[f64]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self
            .generators
            .iter()
            .map(|g| &g.basis.matrix * Complex64::new(g.param.eval(point), 0.0))
            .collect();
        out.extend(self.translation_matrices());
        out
    }

    pub fn translation_matrices(&self) -> Vec<CMat> {
        let n = self.n();
        self.translations
            .iter()
            .map(|&k| {
                let mut m = CMat::zeros(n + 1, n + 1);
                m[(k, n)] = Complex64::new(1.0, 0.0);
                m
            })
            .collect()
    }

    /// Real channel matrices (so/se only).
    pub fn real_channel_matrices(&self, point: &[f64]) -> Vec<DMatrix<f64>> {
        self.channel_matrices(point).iter().map(|m| m.map(|z| z.re)).collect()
    }

    /// Same system with every parameter expression replaced by the constant 1.
    pub fn nominal(&self) -> SystemSpec {
        let mut s = self.clone();
        for g in &mut s.generators {
            g.param = ParamExpr::constant(1.0, self.parameters.len());
        }
        s
    }

    /// Rotational sub-system of an SE(n) spec, as an SO(n) spec.
    pub fn rotational_part(&self) -> Result<SystemSpec> {
        let Algebra::Se(n) = self.algebra else {
            return Err(Error::Spec("rotational part requires an SE(n) spec".into()));
        };
        let so = standard_basis(Algebra::So(n))?;
        let mut generators = Vec::new();
        for g in &self.generators {
            match g.basis.kind {
                BasisKind::SeRotation(i, j) => {
                    let idx = basis_index(Algebra::So(n), BasisKind::SoRotation(i, j))
                        .ok_or_else(|| Error::Internal("rotation index".into()))?;
                    generators.push(Generator { basis: so[idx].clone(), param: g.param.clone() });
                }
                _ => return Err(Error::Spec(format!("{} is not a rotation generator", g.basis.label))),
            }
        }
        Ok(SystemSpec { algebra: Algebra::So(n), generators, translations: vec![], parameters: self.parameters.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamField {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub param: ParamField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationFile {
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeFile {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

/// On-disk spec; indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub group: String,
    pub n: usize,
    pub generators: Vec<GeneratorFile>,
    #[serde(default)]
    pub translations: Vec<TranslationFile>,
    #[serde(default)]
    pub parameters: BTreeMap<String, RangeFile>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<SpecFile> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn into_spec(&self) -> Result<SystemSpec> {
        let algebra = match self.group.as_str() {
            "SO" => Algebra::So(self.n),
            "SE" => Algebra::Se(self.n),
            "SU2" => Algebra::Su2,
            g => return Err(Error::Spec(format!("unknown group {g:?}"))),
        };
        if let Algebra::So(n) | Algebra::Se(n) = algebra {
            if n < 2 {
                return Err(Error::InvalidDimension(format!("n = {n}, need n >= 2")));
            }
        }
        let parameters: Vec<ParameterRange> = self
            .parameters
            .iter()
            .map(|(l, r)| ParameterRange { label: l.clone(), min: r.min, max: r.max, samples: r.samples })
            .collect();
        let labels: Vec<String> = parameters.iter().map(|p| p.label.clone()).collect();
        let basis = standard_basis(algebra)?;
        let one_based = |v: Option<usize>, name: &str| -> Result<usize> {
            match v {
                Some(x) if x >= 1 => Ok(x - 1),
                _ => Err(Error::Spec(format!("generator needs a 1-based index {name:?}"))),
            }
        };
        let mut generators = Vec::new();
        for g in &self.generators {
            let kind = match (g.kind.as_str(), algebra) {
                ("so_basis", Algebra::So(_)) => {
                    BasisKind::SoRotation(one_based(g.i, "i")?, one_based(g.j, "j")?)
                }
                ("se_rotation", Algebra::Se(_)) => {
                    BasisKind::SeRotation(one_based(g.i, "i")?, one_based(g.j, "j")?)
                }
                ("su2_spin", Algebra::Su2) => BasisKind::Su2Spin(one_based(g.k, "k")? + 1),
                (t, a) => return Err(Error::Spec(format!("generator type {t:?} does not fit {a:?}"))),
            };
            let idx = basis_index(algebra, kind)
                .ok_or_else(|| Error::Spec(format!("generator index out of range or not i < j: {g:?}")))?;
            let param = match &g.param {
                ParamField::Number(c) => ParamExpr::constant(*c, labels.len()),
                ParamField::Text(t) => ParamExpr::parse(t, &labels)?,
            };
            generators.push(Generator { basis: basis[idx].clone(), param });
        }
        let translations = self
            .translations
            .iter()
            .map(|t| one_based(Some(t.k), "k"))
            .collect::<Result<Vec<_>>>()?;
        let spec = SystemSpec { algebra, generators, translations, parameters };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &SystemSpec) -> SpecFile {
        let labels = spec.labels();
        let group = match spec.algebra {
            Algebra::So(_) => "SO",
            Algebra::Se(_) => "SE",
            _ => "SU2",
        };
        let generators = spec
            .generators
            .iter()
            .map(|g| {
                let param = if g.param.degree() == 0 {
                    ParamField::Number(g.param.coeff)
                } else {
                    ParamField::Text(g.param.render(&labels))
                };
                let (kind, i, j, k) = match g.basis.kind {
                    BasisKind::SoRotation(i, j) => ("so_basis", Some(i + 1), Some(j + 1), None),
                    BasisKind::SeRotation(i, j) => ("se_rotation", Some(i + 1), Some(j + 1), None),
                    BasisKind::Su2Spin(k) => ("su2_spin", None, None, Some(k)),
                    _ => ("generic", None, None, None),
                };
                GeneratorFile { kind: kind.into(), i, j, k, param }
            })
            .collect();
        SpecFile {
            group: group.into(),
            n: spec.n(),
            generators,
            translations: spec.translations.iter().map(|&k| TranslationFile { k: k + 1 }).collect(),
            parameters: spec
                .parameters
                .iter()
                .map(|p| (p.label.clone(), RangeFile { min: p.min, max: p.max, samples: p.samples }))
                .collect(),
        }
    }
}

/// Builds an SO(n)/SE(n) spec from (i, j, param) triples with 0-based indices.
pub fn rotation_spec(
    algebra: Algebra,
    gens: &[(usize, usize, &str)],
    translations: &[usize],
    parameters: &[(&str, f64, f64, usize)],
) -> Result<SystemSpec> {
    let parameters: Vec<ParameterRange> = parameters
        .iter()
        .map(|&(l, min, max, samples)| ParameterRange { label: l.into(), min, max, samples })
        .collect();
    let labels: Vec<String> = parameters.iter().map(|p| p.label.clone()).collect();
    let basis = standard_basis(algebra)?;
    let mut generators = Vec::new();
    for &(i, j, p) in gens {
        let kind = match algebra {
            Algebra::Se(_) => BasisKind::SeRotation(i, j),
            _ => BasisKind::SoRotation(i, j),
        };
        let idx = basis_index(algebra, kind).ok_or_else(|| Error::Spec(format!("bad pair ({i},{j})")))?;
        generators.push(Generator { basis: basis[idx].clone(), param: ParamExpr::parse(p, &labels)? });
    }
    let spec = SystemSpec { algebra, generators, translations: translations.to_vec(), parameters };
    spec.validate()?;
    Ok(spec)
}
