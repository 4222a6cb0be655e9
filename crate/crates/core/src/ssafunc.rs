//! Functions of the form `f(x) = sup_{y in Omega} h0(x) + sum_j y_j h_j(x)`,
//! where every admissible combination is an SOS-convex polynomial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::poly::{PolyError, Polynomial};
use crate::soscert::{is_sos_convex, SosError, SosVerdict};
use crate::spectra::{svec_index, SpectraError, Spectrahedron};
use crate::sdp::SymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("{0}")]
    Invalid(String),
    #[error("combination at y = {y:?} is not certified SOS-convex ({verdict})")]
    NotSosConvex { y: Vec<f64>, verdict: String },
}

/// How SOS-convexity of the combinations `h0 + sum y_j h_j` was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertPolicy {
    /// `h_1..h_m` are affine, so every combination has the convexity form of `h0`.
    AffineIndex,
    /// Certified at a finite set whose convex hull is `Omega`.
    Generators,
    /// Certified at maximizers of random linear objectives over `Omega`.
    Sampled,
    /// Nonnegative weights on certified pieces plus an unrestricted affine tail.
    SignPattern,
    /// Sum of certified functions; `exhaustive` when every part was.
    Combined { exhaustive: bool },
    /// Not certified.
    Unchecked,
}

impl CertPolicy {
    /// True when the certificate covers every point of `Omega`.
    pub fn is_exhaustive(self) -> bool {
        match self {
            CertPolicy::AffineIndex | CertPolicy::Generators | CertPolicy::SignPattern => true,
            CertPolicy::Combined { exhaustive } => exhaustive,
            CertPolicy::Sampled | CertPolicy::Unchecked => false,
        }
    }

    fn combine(self, other: CertPolicy) -> CertPolicy {
        if self == CertPolicy::Unchecked || other == CertPolicy::Unchecked {
            CertPolicy::Unchecked
        } else {
            CertPolicy::Combined {
                exhaustive: self.is_exhaustive() && other.is_exhaustive(),
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CertPolicy::AffineIndex => "affine-index",
            CertPolicy::Generators => "generators",
            CertPolicy::SignPattern => "sign-pattern",
            CertPolicy::Sampled => "sampled",
            CertPolicy::Combined { exhaustive: true } => "combined-exhaustive",
            CertPolicy::Combined { exhaustive: false } => "combined-sampled",
            CertPolicy::Unchecked => "unchecked",
        }
    }
}

/// Number of random directions used by the sampled policy.
const SAMPLED_DIRECTIONS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SsaFunction {
    n: usize,
    h: Vec<Polynomial>,
    omega: Spectrahedron,
    policy: CertPolicy,
}

/// Even degree bound covering every piece, at least 2.
pub fn even_degree(polys: &[Polynomial]) -> u32 {
    let d = polys.iter().map(Polynomial::degree).max().unwrap_or(0).max(2);
    d + d % 2
}

fn singleton() -> Spectrahedron {
    Spectrahedron::unchecked(SymMatrix::identity(1), Vec::new(), Vec::new())
        .expect("1x1 identity block is valid")
}

fn verdict_text(v: &SosVerdict) -> String {
    match v.margin() {
        Some(t) => format!("{}, margin {t:e}", v.label()),
        None => v.label().to_string(),
    }
}

impl SsaFunction {
    /// Builds and certifies `sup_{y in omega} h[0] + sum_j y_j h[j+1]`.
    pub fn new(h: Vec<Polynomial>, omega: Spectrahedron) -> Result<Self, SsaError> {
        let mut f = Self::unchecked(h, omega)?;
        f.policy = f.certify()?;
        Ok(f)
    }

    /// Checks shapes only; the result carries [`CertPolicy::Unchecked`].
    pub fn unchecked(h: Vec<Polynomial>, omega: Spectrahedron) -> Result<Self, SsaError> {
        let n = match h.first() {
            Some(h0) => h0.num_vars(),
            None => return Err(SsaError::Invalid("h must contain at least h0".into())),
        };
        if h.len() != omega.m() + 1 {
            return Err(SsaError::Invalid(format!(
                "{} index polynomials for a set in R^{}",
                h.len() - 1,
                omega.m()
            )));
        }
        if let Some(bad) = h.iter().find(|p| p.num_vars() != n) {
            return Err(SsaError::Invalid(format!(
                "polynomial in {} variables, expected {n}",
                bad.num_vars()
            )));
        }
        Ok(SsaFunction {
            n,
            h,
            omega,
            policy: CertPolicy::Unchecked,
        })
    }

    /// A single polynomial, certified SOS-convex, with a trivial index set.
    pub fn polynomial(f: Polynomial) -> Result<Self, SsaError> {
        Self::new(vec![f], singleton())
    }

    fn combination(&self, y: &[f64]) -> Result<Polynomial, PolyError> {
        let mut acc = self.h[0].clone();
        for (yj, hj) in y.iter().zip(&self.h[1..]) {
            acc = acc.axpy(*yj, hj)?;
        }
        Ok(acc)
    }

    fn certify_at(&self, y: &[f64]) -> Result<(), SsaError> {
        let g = self.combination(y)?;
        if g.degree() <= 1 {
            // the convexity form of an affine function is identically zero
            return Ok(());
        }
        let v = is_sos_convex(&g)?;
        if v.is_yes() {
            Ok(())
        } else {
            Err(SsaError::NotSosConvex {
                y: y.to_vec(),
                verdict: verdict_text(&v),
            })
        }
    }

    fn certify(&self) -> Result<CertPolicy, SsaError> {
        let m = self.m();
        if self.h[1..].iter().all(|p| p.degree() <= 1) {
            self.certify_at(&vec![0.0; m])?;
            return Ok(CertPolicy::AffineIndex);
        }
        if let Some(vs) = self.omega.vertices() {
            for v in vs {
                self.certify_at(v)?;
            }
            return Ok(CertPolicy::Generators);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..SAMPLED_DIRECTIONS.max(2 * m) {
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = self.omega.maximize_linear(&c)?.y;
            self.certify_at(&y)?;
        }
        Ok(CertPolicy::Sampled)
    }

    /// Records a certificate established outside this module.
    pub(crate) fn with_policy(mut self, policy: CertPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.omega.m()
    }

    pub fn h(&self) -> &[Polynomial] {
        &self.h
    }

    pub fn omega(&self) -> &Spectrahedron {
        &self.omega
    }

    pub fn policy(&self) -> CertPolicy {
        self.policy
    }

    pub fn degree(&self) -> u32 {
        even_degree(&self.h)
    }

    fn check_point(&self, x: &[f64]) -> Result<(), SsaError> {
        if x.len() != self.n {
            return Err(SsaError::Invalid(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `f(x)` together with a maximizing index `y`.
    pub fn eval_with_argmax(&self, x: &[f64]) -> Result<(f64, Vec<f64>), SsaError> {
        self.check_point(x)?;
        let base = self.h[0].evaluate(x)?;
        if self.m() == 0 {
            return Ok((base, Vec::new()));
        }
        let c = self.h[1..]
            .iter()
            .map(|p| p.evaluate(x))
            .collect::<Result<Vec<_>, _>>()?;
        let r = self.omega.maximize_linear(&c)?;
        Ok((base + r.value, r.y))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, SsaError> {
        Ok(self.eval_with_argmax(x)?.0)
    }

    /// A subgradient `grad h0(x) + sum_j y_j grad h_j(x)` at a maximizing `y`.
    pub fn subgradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), SsaError> {
        let (v, y) = self.eval_with_argmax(x)?;
        let g = self.combination(&y)?;
        let grad = g
            .gradient()
            .iter()
            .map(|p| p.evaluate(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((v, grad))
    }

    /// `c * f` for `c >= 0`.
    pub fn scale(&self, c: f64) -> Result<Self, SsaError> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(SsaError::Invalid(format!("scale factor {c} must be finite and >= 0")));
        }
        Ok(SsaFunction {
            n: self.n,
            h: self.h.iter().map(|p| p.scale(c)).collect(),
            omega: self.omega.clone(),
            policy: self.policy,
        })
    }

    /// `f + g` over the product of the index sets.
    pub fn add(&self, other: &SsaFunction) -> Result<Self, SsaError> {
        if self.n != other.n {
            return Err(SsaError::Invalid(format!(
                "cannot add functions in {} and {} variables",
                self.n, other.n
            )));
        }
        let (omega, h) = match (self.m(), other.m()) {
            (_, 0) => (self.omega.clone(), self.h.clone()),
            (0, _) => (other.omega.clone(), other.h.clone()),
            _ => {
                let mut h = self.h.clone();
                h.extend(other.h[1..].iter().cloned());
                (self.omega.product(&other.omega), h)
            }
        };
        let mut h = h;
        h[0] = self.h[0].add(&other.h[0])?;
        Ok(SsaFunction {
            n: self.n,
            h,
            omega,
            policy: self.policy.combine(other.policy),
        })
    }

    /// `max_i f_i` over the corner simplex: `h0 = f_last`, `h_j = f_j - f_last`.
    /// The vertices `0, e_1, ...` recover the individual pieces.
    pub fn from_max_of_polys(fs: &[Polynomial]) -> Result<Self, SsaError> {
        let last = match fs.last() {
            Some(p) => p,
            None => return Err(SsaError::Invalid("need at least one polynomial".into())),
        };
        for f in fs {
            let v = is_sos_convex(f)?;
            if !v.is_yes() {
                return Err(SsaError::NotSosConvex {
                    y: Vec::new(),
                    verdict: format!("{f}: {}", verdict_text(&v)),
                });
            }
        }
        if fs.len() == 1 {
            let mut f = Self::unchecked(vec![last.clone()], singleton())?;
            f.policy = CertPolicy::AffineIndex;
            return Ok(f);
        }
        let mut h = vec![last.clone()];
        for f in &fs[..fs.len() - 1] {
            h.push(f.sub(last)?);
        }
        let mut f = Self::unchecked(h, Spectrahedron::corner_simplex(fs.len() - 1)?)?;
        f.policy = CertPolicy::Generators;
        Ok(f)
    }

    /// `||x||_2 = sup_{||y|| <= 1} y^T x`.
    pub fn euclidean_norm(n: usize) -> Result<Self, SsaError> {
        let mut h = vec![Polynomial::zero(n)?];
        for k in 0..n {
            h.push(Polynomial::variable(n, k)?);
        }
        Self::new(h, Spectrahedron::l2_ball(n)?)
    }

    /// `||x||_1` as the sum of `|x_k| = max(x_k, -x_k)`.
    pub fn l1_norm(n: usize) -> Result<Self, SsaError> {
        let mut acc: Option<SsaFunction> = None;
        for k in 0..n {
            let xk = Polynomial::variable(n, k)?;
            let part = Self::from_max_of_polys(&[xk.clone(), xk.scale(-1.0)])?;
            acc = Some(match acc {
                None => part,
                Some(a) => a.add(&part)?,
            });
        }
        acc.ok_or_else(|| SsaError::Invalid("l1 norm needs n >= 1".into()))
    }

    /// Largest eigenvalue of the symmetric matrix whose vectorization (lower
    /// triangle by rows, off-diagonal entries times `sqrt 2`) is `x`.
    pub fn lambda_max(k: usize) -> Result<Self, SsaError> {
        if k == 0 {
            return Err(SsaError::Invalid("matrix order must be >= 1".into()));
        }
        let n = k * (k + 1) / 2;
        if k == 1 {
            return Self::polynomial(Polynomial::variable(1, 0)?);
        }
        let last = Polynomial::variable(n, svec_index(k - 1, k - 1))?;
        let mut h = vec![last.clone()];
        for i in 0..k {
            for j in 0..=i {
                if i == k - 1 && j == k - 1 {
                    continue;
                }
                let x = Polynomial::variable(n, svec_index(i, j))?;
                h.push(if i == j { x.sub(&last)? } else { x });
            }
        }
        Self::new(h, Spectrahedron::psd_trace_one_reduced(k)?)
    }

    /// `||Ax - b||^2 + mu ||x||_1`.
    pub fn least_squares_l1(a: &[Vec<f64>], b: &[f64], mu: f64) -> Result<Self, SsaError> {
        Self::least_squares_elastic(a, b, mu, 0.0)
    }

    /// `||Ax - b||^2 + mu1 ||x||_1 + mu2 ||x||^2`.
    pub fn least_squares_elastic(
        a: &[Vec<f64>],
        b: &[f64],
        mu1: f64,
        mu2: f64,
    ) -> Result<Self, SsaError> {
        if !(mu1 >= 0.0) || !(mu2 >= 0.0) {
            return Err(SsaError::Invalid("regularization weights must be >= 0".into()));
        }
        let ls = least_squares(a, b)?;
        let n = ls.num_vars();
        let mut smooth = ls;
        if mu2 > 0.0 {
            for k in 0..n {
                smooth = smooth.axpy(mu2, &Polynomial::variable(n, k)?.square()?)?;
            }
        }
        let base = Self::polynomial(smooth)?;
        if mu1 > 0.0 {
            base.add(&Self::l1_norm(n)?.scale(mu1)?)
        } else {
            Ok(base)
        }
    }
}

/// `||Ax - b||^2` as a polynomial.
pub fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Result<Polynomial, SsaError> {
    let n = a.first().map(Vec::len).unwrap_or(0);
    if n == 0 || a.len() != b.len() || a.iter().any(|r| r.len() != n) {
        return Err(SsaError::Invalid("A must be a nonempty rectangular matrix matching b".into()));
    }
    let mut acc = Polynomial::zero(n)?;
    for (row, &bi) in a.iter().zip(b) {
        let mut r = Polynomial::constant(n, -bi)?;
        for (k, &aik) in row.iter().enumerate() {
            r = r.axpy(aik, &Polynomial::variable(n, k)?)?;
        }
        acc = acc.add(&r.square()?)?;
    }
    Ok(acc)
}

/// `min f0(x)` subject to `f_i(x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaProgram {
    objective: SsaFunction,
    constraints: Vec<SsaFunction>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SlaterWitness {
    pub x0: Vec<f64>,
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlaterSearch {
    Witness(SlaterWitness),
    NotFound { best: SlaterWitness },
}

/// Margins must be below this to count as strictly feasible.
pub const SLATER_TOL: f64 = -1e-8;
const SLATER_ITERS: usize = 100;

impl SsaProgram {
    pub fn new(objective: SsaFunction, constraints: Vec<SsaFunction>) -> Result<Self, SsaError> {
        let n = objective.n();
        if let Some(c) = constraints.iter().find(|c| c.n() != n) {
            return Err(SsaError::Invalid(format!(
                "constraint in {} variables, objective in {n}",
                c.n()
            )));
        }
        Ok(SsaProgram {
            objective,
            constraints,
        })
    }

    pub fn n(&self) -> usize {
        self.objective.n()
    }

    pub fn objective(&self) -> &SsaFunction {
        &self.objective
    }

    pub fn constraints(&self) -> &[SsaFunction] {
        &self.constraints
    }

    /// Common even degree of all pieces.
    pub fn degree(&self) -> u32 {
        std::iter::once(&self.objective)
            .chain(&self.constraints)
            .map(SsaFunction::degree)
            .max()
            .unwrap_or(2)
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>, SsaError> {
        self.constraints.iter().map(|c| c.eval(x)).collect()
    }

    /// Looks for `x0` with every `f_i(x0) < 0`: the hint, then the origin, then
    /// subgradient steps on `max_i f_i` with step length `1/k`.
    pub fn find_slater(&self, hint: Option<&[f64]>) -> Result<SlaterSearch, SsaError> {
        let n = self.n();
        let strict = |m: &[f64]| m.iter().all(|&v| v < SLATER_TOL);
        let mut best: Option<SlaterWitness> = None;
        let consider = |x: Vec<f64>, margins: Vec<f64>, best: &mut Option<SlaterWitness>| {
            let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let better = match best {
                None => true,
                Some(b) => worst < b.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            if better {
                *best = Some(SlaterWitness { x0: x, margins });
            }
        };
        let mut starts = Vec::new();
        if let Some(h) = hint {
            if h.len() != n {
                return Err(SsaError::Invalid(format!(
                    "hint has {} coordinates, expected {n}",
                    h.len()
                )));
            }
            starts.push(h.to_vec());
        }
        starts.push(vec![0.0; n]);
        for x in starts {
            let margins = self.margins(&x)?;
            if strict(&margins) {
                return Ok(SlaterSearch::Witness(SlaterWitness { x0: x, margins }));
            }
            consider(x, margins, &mut best);
        }
        let mut x = best.as_ref().map(|b| b.x0.clone()).unwrap_or_else(|| vec![0.0; n]);
        for k in 1..=SLATER_ITERS {
            let mut worst = f64::NEG_INFINITY;
            let mut grad = vec![0.0; n];
            for c in &self.constraints {
                let (v, g) = c.subgradient(&x)?;
                if v > worst {
                    worst = v;
                    grad = g;
                }
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= gi / (norm * k as f64);
            }
            let margins = self.margins(&x)?;
            if strict(&margins) {
                return Ok(SlaterSearch::Witness(SlaterWitness { x0: x, margins }));
            }
            consider(x.clone(), margins, &mut best);
        }
        Ok(SlaterSearch::NotFound {
            best: best.expect("at least one candidate was evaluated"),
        })
    }
}
