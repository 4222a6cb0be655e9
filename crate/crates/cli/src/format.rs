//! The JSON problem file, version "1".

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sosrelax::robust::{RobustError, RobustProgram, UncertainConstraint};
use sosrelax::spectra::{SpectraError, Spectrahedron};
use sosrelax::ssafunc::{SsaError, SsaFunction, SsaProgram};
use sosrelax::{MultiIndex, PolyError, Polynomial, SymMatrix};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{0}")]
    Model(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Ssa(#[from] SsaError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust: Option<RobustSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_hint: Option<Vec<f64>>,
}

/// One monomial; duplicate exponent vectors are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exps: Vec<u32>,
    pub coef: f64,
}

pub type PolySpec = Vec<Term>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// A single SOS-convex polynomial.
    Poly { poly: PolySpec },
    /// `sup_{y in omega} h[0] + sum_j y_j h[j]`.
    Ssa { h: Vec<PolySpec>, omega: OmegaSpec },
    EuclideanNorm {},
    L1Norm {},
    /// Largest eigenvalue of the `k x k` matrix with scaled lower-triangle
    /// vectorization `x`; requires `n = k(k+1)/2`.
    LambdaMax { k: usize },
    /// Pointwise maximum of SOS-convex polynomials.
    Max { polys: Vec<PolySpec> },
    Sum { terms: Vec<FunctionSpec> },
    Scaled { c: f64, f: Box<FunctionSpec> },
}

/// Symmetric matrices are written as their lower triangles, row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Lmi {
        a0: SymMatrix,
        a: Vec<SymMatrix>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        b: Vec<SymMatrix>,
    },
    Simplex { m: usize },
    CornerSimplex { m: usize },
    L2Ball { m: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    PsdTraceOne { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustSpec {
    pub objective: PolySpec,
    pub constraints: Vec<UncertainSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertainSpec {
    pub g: Vec<PolySpec>,
    pub t: usize,
    #[serde(rename = "U")]
    pub u: UncertaintySpec,
}

/// `{u : a0 + sum_j u_j a_j >= 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    pub a0: SymMatrix,
    pub a: Vec<SymMatrix>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

/// Converts a term list into a polynomial in `n` variables.
pub fn poly_from_spec(n: usize, spec: &PolySpec) -> Result<Polynomial, FileError> {
    if let Some(t) = spec.iter().find(|t| t.exps.len() != n) {
        return Err(FileError::Model(format!(
            "exponent vector {:?} has {} entries, expected {n}",
            t.exps,
            t.exps.len()
        )));
    }
    Ok(Polynomial::from_terms(
        n,
        spec.iter().map(|t| (MultiIndex::new(t.exps.clone()), t.coef)),
    )?)
}

/// The nonzero terms of `p`.
pub fn poly_to_spec(p: &Polynomial) -> PolySpec {
    p.terms()
        .filter(|(_, c)| *c != 0.0)
        .map(|(m, c)| Term {
            exps: m.exponents().to_vec(),
            coef: c,
        })
        .collect()
}

impl OmegaSpec {
    pub fn build(&self) -> Result<Spectrahedron, FileError> {
        Ok(match self {
            OmegaSpec::Lmi { a0, a, b } => Spectrahedron::from_lmi(a0.clone(), a.clone(), b.clone())?,
            OmegaSpec::Simplex { m } => Spectrahedron::simplex(*m)?,
            OmegaSpec::CornerSimplex { m } => Spectrahedron::corner_simplex(*m)?,
            OmegaSpec::L2Ball { m } => Spectrahedron::l2_ball(*m)?,
            OmegaSpec::Box { lo, hi } => Spectrahedron::box_set(lo, hi)?,
            OmegaSpec::PsdTraceOne { k } => Spectrahedron::psd_trace_one(*k)?,
        })
    }
}

impl FunctionSpec {
    pub fn build(&self, n: usize) -> Result<SsaFunction, FileError> {
        Ok(match self {
            FunctionSpec::Poly { poly } => SsaFunction::polynomial(poly_from_spec(n, poly)?)?,
            FunctionSpec::Ssa { h, omega } => {
                let h = h
                    .iter()
                    .map(|p| poly_from_spec(n, p))
                    .collect::<Result<Vec<_>, _>>()?;
                SsaFunction::new(h, omega.build()?)?
            }
            FunctionSpec::EuclideanNorm {} => SsaFunction::euclidean_norm(n)?,
            FunctionSpec::L1Norm {} => SsaFunction::l1_norm(n)?,
            FunctionSpec::LambdaMax { k } => {
                if k * (k + 1) / 2 != n {
                    return Err(FileError::Model(format!(
                        "lambda_max of order {k} needs n = {}, file declares {n}",
                        k * (k + 1) / 2
                    )));
                }
                SsaFunction::lambda_max(*k)?
            }
            FunctionSpec::Max { polys } => {
                let ps = polys
                    .iter()
                    .map(|p| poly_from_spec(n, p))
                    .collect::<Result<Vec<_>, _>>()?;
                SsaFunction::from_max_of_polys(&ps)?
            }
            FunctionSpec::Sum { terms } => {
                let mut it = terms.iter();
                let first = it
                    .next()
                    .ok_or_else(|| FileError::Model("empty sum".into()))?
                    .build(n)?;
                it.try_fold(first, |acc, t| Ok::<_, FileError>(acc.add(&t.build(n)?)?))?
            }
            FunctionSpec::Scaled { c, f } => f.build(n)?.scale(*c)?,
        })
    }
}

impl UncertainSpec {
    pub fn build(&self, n: usize) -> Result<UncertainConstraint, FileError> {
        let g = self
            .g
            .iter()
            .map(|p| poly_from_spec(n, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(UncertainConstraint::new(
            g,
            self.t,
            self.u.a0.clone(),
            self.u.a.clone(),
        )?)
    }
}

/// The model described by a file.
pub enum Model {
    Program(SsaProgram),
    Robust(RobustProgram),
}

impl ProblemFile {
    /// Parses and checks the schema; no numeric work is done.
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| FileError::Syntax {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        file.check()?;
        Ok(file)
    }

    fn check(&self) -> Result<(), FileError> {
        if self.version != FORMAT_VERSION {
            return Err(FileError::Model(format!(
                "unsupported version \"{}\", expected \"{FORMAT_VERSION}\"",
                self.version
            )));
        }
        if self.n == 0 {
            return Err(FileError::Model("n must be at least 1".into()));
        }
        match (&self.objective, &self.robust) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(FileError::Model(
                    "exactly one of \"objective\" and \"robust\" must be given".into(),
                ))
            }
        }
        if self.robust.is_some() && !self.constraints.is_empty() {
            return Err(FileError::Model(
                "robust problems list their constraints inside \"robust\"".into(),
            ));
        }
        if let Some(h) = &self.slater_hint {
            if h.len() != self.n {
                return Err(FileError::Model(format!(
                    "slater_hint has {} entries, expected {}",
                    h.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn build(&self) -> Result<Model, FileError> {
        if let Some(r) = &self.robust {
            let objective = poly_from_spec(self.n, &r.objective)?;
            let cons = r
                .constraints
                .iter()
                .map(|c| c.build(self.n))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Model::Robust(RobustProgram::new(objective, cons)?));
        }
        let objective = self
            .objective
            .as_ref()
            .ok_or_else(|| FileError::Model("missing objective".into()))?
            .build(self.n)?;
        let cons = self
            .constraints
            .iter()
            .map(|c| c.build(self.n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Model::Program(SsaProgram::new(objective, cons)?))
    }

    /// The program, reducing a robust model first.
    pub fn program(&self) -> Result<SsaProgram, FileError> {
        match self.build()? {
            Model::Program(p) => Ok(p),
            Model::Robust(r) => Ok(r.to_ssa_program()?),
        }
    }
}
