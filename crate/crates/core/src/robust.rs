//! Robust SOS-convex programs under restricted spectrahedral uncertainty and
//! their reduction to [`SsaProgram`]s.
//!
//! A constraint `g0(x) + sum_j u_j g_j(x) <= 0 for all u in U` is robustly
//! feasible when its worst case over `U` is nonpositive. The first `t`
//! coordinates of `u` are sign-constrained, which keeps every combination
//! SOS-convex when `g_1..g_t` are SOS-convex and `g_{t+1}..g_s` are affine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::poly::{PolyError, Polynomial};
use crate::sdp::SymMatrix;
use crate::soscert::{is_sos_convex, SosError};
use crate::spectra::{SpectraError, Spectrahedron};
use crate::ssafunc::{CertPolicy, SsaError, SsaFunction, SsaProgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Ssa(#[from] SsaError),
    #[error("{0}")]
    Invalid(String),
    #[error("g^({0}) is not certified SOS-convex")]
    NotSosConvex(usize),
    #[error("g^({index}) must be affine but has degree {degree}")]
    NotAffine { index: usize, degree: u32 },
    #[error("the uncertainty set is unbounded along {0:?}")]
    Unbounded(Vec<f64>),
    #[error("the uncertainty set is empty")]
    EmptyUncertainty,
}

/// `g0(x) + sum_j u_j g_j(x) <= 0` for every `u` with
/// `A0 + sum_j u_j A_j >= 0` and `u_1..u_t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainConstraint {
    g: Vec<Polynomial>,
    t: usize,
    a0: SymMatrix,
    a: Vec<SymMatrix>,
    embedded: Spectrahedron,
}

fn certify_piece(g: &Polynomial, index: usize) -> Result<(), RobustError> {
    if is_sos_convex(g)?.is_yes() {
        Ok(())
    } else {
        Err(RobustError::NotSosConvex(index))
    }
}

impl UncertainConstraint {
    /// Validates the sign pattern of `g` and that the uncertainty set is
    /// nonempty and bounded.
    pub fn new(
        g: Vec<Polynomial>,
        t: usize,
        a0: SymMatrix,
        a: Vec<SymMatrix>,
    ) -> Result<Self, RobustError> {
        let s = a.len();
        if g.len() != s + 1 {
            return Err(RobustError::Invalid(format!(
                "{} polynomials for {} uncertain parameters",
                g.len(),
                s
            )));
        }
        if t > s {
            return Err(RobustError::Invalid(format!("split index {t} exceeds s = {s}")));
        }
        let n = g[0].num_vars();
        if g.iter().any(|p| p.num_vars() != n) {
            return Err(RobustError::Invalid("polynomials disagree on the variable count".into()));
        }
        for (j, p) in g.iter().enumerate().skip(t + 1) {
            if p.degree() > 1 {
                return Err(RobustError::NotAffine {
                    index: j,
                    degree: p.degree(),
                });
            }
        }
        for (j, p) in g.iter().enumerate().take(t + 1) {
            certify_piece(p, j)?;
        }
        let embedded = embed(t, &a0, &a)?;
        if s > 0 {
            match embedded.validate() {
                Ok(()) => {}
                Err(SpectraError::Empty) => return Err(RobustError::EmptyUncertainty),
                Err(SpectraError::Unbounded { lambda, .. }) => {
                    return Err(RobustError::Unbounded(lambda))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(UncertainConstraint {
            g,
            t,
            a0,
            a,
            embedded,
        })
    }

    /// A constraint without uncertainty.
    pub fn certain(g0: Polynomial) -> Result<Self, RobustError> {
        Self::new(vec![g0], 0, SymMatrix::identity(1), Vec::new())
    }

    /// The constraint at the single scenario `u = ubar`, with the scenario
    /// folded into `g0`.
    pub fn singleton(g: &[Polynomial], ubar: &[f64]) -> Result<Self, RobustError> {
        if g.len() != ubar.len() + 1 {
            return Err(RobustError::Invalid("scenario length must be g.len() - 1".into()));
        }
        let mut g0 = g[0].clone();
        for (gj, &uj) in g[1..].iter().zip(ubar) {
            g0 = g0.axpy(uj, gj)?;
        }
        Self::certain(g0)
    }

    /// `U = {u : C u <= d}` as a diagonal LMI.
    pub fn polytope(
        g: Vec<Polynomial>,
        t: usize,
        c: &[Vec<f64>],
        d: &[f64],
    ) -> Result<Self, RobustError> {
        let s = g.len().saturating_sub(1);
        if c.len() != d.len() || c.is_empty() || c.iter().any(|r| r.len() != s) {
            return Err(RobustError::Invalid("C must have one row of length s per entry of d".into()));
        }
        let a0 = SymMatrix::from_diagonal(d);
        let a = (0..s)
            .map(|j| SymMatrix::from_diagonal(&c.iter().map(|r| -r[j]).collect::<Vec<_>>()))
            .collect();
        Self::new(g, t, a0, a)
    }

    /// `||u_{1..t}|| <= 1` and `||u_{t+1..s}|| <= 1` as two arrow LMIs.
    pub fn restricted_ellipsoid(g: Vec<Polynomial>, t: usize) -> Result<Self, RobustError> {
        let s = g.len().saturating_sub(1);
        if t > s || s == 0 {
            return Err(RobustError::Invalid("need 0 <= t <= s and s >= 1".into()));
        }
        let set = match (t, s - t) {
            (0, k) | (k, 0) => Spectrahedron::l2_ball(k)?,
            (k1, k2) => Spectrahedron::l2_ball(k1)?.product(&Spectrahedron::l2_ball(k2)?),
        };
        Self::new(g, t, set.a0().clone(), set.a().to_vec())
    }

    pub fn g(&self) -> &[Polynomial] {
        &self.g
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn s(&self) -> usize {
        self.a.len()
    }

    pub fn n(&self) -> usize {
        self.g[0].num_vars()
    }

    pub fn a0(&self) -> &SymMatrix {
        &self.a0
    }

    pub fn a(&self) -> &[SymMatrix] {
        &self.a
    }

    /// The uncertainty set with the sign constraints folded into the LMI.
    pub fn uncertainty(&self) -> &Spectrahedron {
        &self.embedded
    }

    /// `g(x, u)`.
    pub fn value(&self, x: &[f64], u: &[f64]) -> Result<f64, RobustError> {
        let mut v = self.g[0].evaluate(x)?;
        for (gj, &uj) in self.g[1..].iter().zip(u) {
            v += uj * gj.evaluate(x)?;
        }
        Ok(v)
    }
}

/// Builds the embedded LMI with a diagonal sign block for `u_1..u_t`.
fn embed(t: usize, a0: &SymMatrix, a: &[SymMatrix]) -> Result<Spectrahedron, RobustError> {
    if a.is_empty() {
        return Ok(Spectrahedron::unchecked(a0.clone(), Vec::new(), Vec::new())?);
    }
    if t == 0 {
        return Ok(Spectrahedron::unchecked(a0.clone(), a.to_vec(), Vec::new())?);
    }
    let zero = SymMatrix::zeros(t);
    let sign = |j: usize| {
        let mut e = vec![0.0; t];
        if j < t {
            e[j] = 1.0;
        }
        SymMatrix::from_diagonal(&e)
    };
    let big0 = SymMatrix::block_diag(&[&zero, a0]);
    let big = a
        .iter()
        .enumerate()
        .map(|(j, aj)| SymMatrix::block_diag(&[&sign(j), aj]))
        .collect();
    Ok(Spectrahedron::unchecked(big0, big, Vec::new())?)
}

/// The embedded uncertainty set of `c`.
pub fn embed_uncertainty(c: &UncertainConstraint) -> Spectrahedron {
    c.embedded.clone()
}

/// `min f(x)` subject to robust constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustProgram {
    objective: Polynomial,
    constraints: Vec<UncertainConstraint>,
}

impl RobustProgram {
    pub fn new(objective: Polynomial, constraints: Vec<UncertainConstraint>) -> Result<Self, RobustError> {
        let n = objective.num_vars();
        if let Some(c) = constraints.iter().find(|c| c.n() != n) {
            return Err(RobustError::Invalid(format!(
                "constraint in {} variables, objective in {n}",
                c.n()
            )));
        }
        certify_piece(&objective, 0)?;
        Ok(RobustProgram {
            objective,
            constraints,
        })
    }

    pub fn n(&self) -> usize {
        self.objective.num_vars()
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn constraints(&self) -> &[UncertainConstraint] {
        &self.constraints
    }

    /// `f_i(x) = sup_{u in U_i} g_i(x, u)` as SOS-convex semialgebraic functions.
    pub fn to_ssa_program(&self) -> Result<SsaProgram, RobustError> {
        let objective = SsaFunction::polynomial(self.objective.clone())?;
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                if c.s() == 0 {
                    Ok(SsaFunction::polynomial(c.g[0].clone())?)
                } else {
                    Ok(SsaFunction::unchecked(c.g.clone(), c.embedded.clone())?
                        .with_policy(CertPolicy::SignPattern))
                }
            })
            .collect::<Result<Vec<_>, RobustError>>()?;
        Ok(SsaProgram::new(objective, constraints)?)
    }
}

/// Worst sampled constraint values at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustCheck {
    pub margins: Vec<f64>,
    /// The scenario attaining each margin.
    pub worst_u: Vec<Vec<f64>>,
    pub samples: usize,
}

impl RobustCheck {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.margins.iter().all(|&m| m <= tol)
    }
}

/// Samples `k` scenarios per constraint: maximizers of random linear
/// objectives and random mixtures of them, plus the maximizer of
/// `u -> g(x, u)` itself.
pub fn verify_robust(
    x: &[f64],
    rp: &RobustProgram,
    k: usize,
    seed: u64,
) -> Result<RobustCheck, RobustError> {
    if x.len() != rp.n() {
        return Err(RobustError::Invalid(format!(
            "point has {} coordinates, expected {}",
            x.len(),
            rp.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = Vec::with_capacity(rp.constraints.len());
    let mut worst_u = Vec::with_capacity(rp.constraints.len());
    for c in &rp.constraints {
        let s = c.s();
        if s == 0 {
            margins.push(c.value(x, &[])?);
            worst_u.push(Vec::new());
            continue;
        }
        let grad: Vec<f64> = c.g[1..]
            .iter()
            .map(|p| p.evaluate(x))
            .collect::<Result<_, _>>()?;
        let mut scenarios = vec![c.embedded.maximize_linear(&grad)?.y];
        let boundary = k.div_ceil(2).max(1);
        for _ in 0..boundary {
            let dir: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
            scenarios.push(c.embedded.maximize_linear(&dir)?.y);
        }
        let extremes = scenarios.len();
        while scenarios.len() < extremes + k.saturating_sub(boundary) {
            let w: Vec<f64> = (0..extremes).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let u = (0..s)
                .map(|j| (0..extremes).map(|i| w[i] * scenarios[i][j]).sum::<f64>() / total)
                .collect();
            scenarios.push(u);
        }
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for u in scenarios {
            let v = c.value(x, &u)?;
            if v > best.0 {
                best = (v, u);
            }
        }
        margins.push(best.0);
        worst_u.push(best.1);
    }
    let samples = k;
    Ok(RobustCheck {
        margins,
        worst_u,
        samples,
    })
}
