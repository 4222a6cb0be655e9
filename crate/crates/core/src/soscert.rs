//! Sum-of-squares and SOS-convexity certificates through Gram matrices.
//!
//! A polynomial `f` of degree `2l` is SOS exactly when `f = z^T W z` for some
//! `W >= 0`, with `z` the monomials of degree at most `l`. The search is posed as
//! a max-margin SDP: maximize `t` subject to `W - tI >= 0` and the coefficient
//! equations. A nonnegative optimal margin yields a certificate. A negative one
//! comes with a moment functional `L` that is nonnegative on all squares but
//! negative on `f`, which refutes membership.

use std::collections::HashMap;

use thiserror::Error;

use crate::poly::{Block, GramPairing, MultiIndex, PolyError, Polynomial};
use crate::sdp::{
    solve, ConeSpec, LinearForm, SdpError, SdpProblem, SolveStatus, SolverOptions, SymMatrix,
};

/// Margins at or above this value are accepted as SOS.
pub const MARGIN_TOL: f64 = -1e-9;

/// Margins in `[NEAR_MARGIN, MARGIN_TOL)` are retried by projecting the Gram
/// matrix onto the PSD cone and verifying the result.
const NEAR_MARGIN: f64 = -1e-6;

/// Certificates must reproduce the target to this relative coefficient norm.
const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("Gram matrix is indefinite (smallest eigenvalue {0:e})")]
    Indefinite(f64),
    #[error("polynomial is not certified SOS-convex ({0})")]
    NotCertified(String),
}

/// `target = z^T gram z` up to `residual`, where `z` lists `monomials`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCertificate {
    pub target: Polynomial,
    pub monomials: Vec<MultiIndex>,
    pub gram: SymMatrix,
    /// Optimal value of the max-margin problem.
    pub margin: f64,
    /// Coefficient norm of `target - z^T gram z`.
    pub residual: f64,
}

impl GramCertificate {
    /// Expands `z^T gram z` into a polynomial.
    pub fn reconstruct(&self) -> Result<Polynomial, PolyError> {
        let n = self.target.num_vars();
        let mut terms: Vec<(MultiIndex, f64)> = Vec::new();
        for i in 0..self.monomials.len() {
            for j in 0..=i {
                let w = self.gram.get(i, j);
                if w != 0.0 {
                    let c = if i == j { w } else { 2.0 * w };
                    terms.push((self.monomials[i].combine(&self.monomials[j]), c));
                }
            }
        }
        let p = Polynomial::from_terms(n, terms)?;
        p.with_degree_bound(self.target.degree().max(p.degree()))
    }

    pub fn min_eig(&self) -> f64 {
        self.gram.min_eig()
    }
}

/// Why a polynomial was refuted.
#[derive(Debug, Clone, PartialEq)]
pub enum Refutation {
    /// A nonzero polynomial of odd degree takes both signs.
    OddDegree,
    /// A coefficient that no Gram form over the basis can produce.
    UnreachableTerm(MultiIndex),
    /// Moments `y` with `M(y) >= 0` and `L_y(f) = value < 0`; since
    /// `L_y(g^2) >= 0` for every `g`, `f` cannot be a sum of squares.
    Separator {
        moments: Vec<(MultiIndex, f64)>,
        value: f64,
        moment_min_eig: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SosVerdict {
    Yes(GramCertificate),
    No(Refutation),
    Unknown { margin: Option<f64>, status: SolveStatus },
}

impl SosVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, SosVerdict::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, SosVerdict::No(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            SosVerdict::Yes(_) => "yes",
            SosVerdict::No(_) => "no",
            SosVerdict::Unknown { .. } => "unknown",
        }
    }

    pub fn margin(&self) -> Option<f64> {
        match self {
            SosVerdict::Yes(c) => Some(c.margin),
            SosVerdict::No(Refutation::Separator { value, .. }) => Some(*value),
            SosVerdict::No(_) => None,
            SosVerdict::Unknown { margin, .. } => *margin,
        }
    }

    pub fn certificate(&self) -> Option<&GramCertificate> {
        match self {
            SosVerdict::Yes(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosDecomposition {
    pub terms: Vec<Polynomial>,
}

impl SosDecomposition {
    /// `sum_j f_j^2`.
    pub fn sum_of_squares(&self) -> Result<Polynomial, PolyError> {
        let mut it = self.terms.iter();
        let first = match it.next() {
            Some(f) => f.square()?,
            None => return Err(PolyError::NoVariables),
        };
        it.try_fold(first, |acc, f| acc.add(&f.square()?))
    }
}

fn default_options() -> SolverOptions {
    SolverOptions {
        gap_tol: 1e-10,
        feas_tol: 1e-10,
        max_iter: 150,
        ..SolverOptions::default()
    }
}

/// Gram basis plus, for each reachable monomial, the unordered pairs producing it.
struct GramSystem {
    monomials: Vec<MultiIndex>,
    rows: Vec<(MultiIndex, Vec<(usize, usize)>)>,
}

impl GramSystem {
    fn full(n: usize, half: u32) -> Result<Self, PolyError> {
        let pairing = GramPairing::shared(n, half)?;
        let monomials = pairing.half_basis().monomials().to_vec();
        let rows = (0..pairing.num_monomials())
            .map(|a| {
                (
                    pairing.full_basis().monomial(a).clone(),
                    pairing.pairs(a).to_vec(),
                )
            })
            .collect();
        Ok(GramSystem { monomials, rows })
    }

    fn from_monomials(monomials: Vec<MultiIndex>) -> Self {
        let mut index: HashMap<MultiIndex, usize> = HashMap::new();
        let mut rows: Vec<(MultiIndex, Vec<(usize, usize)>)> = Vec::new();
        for i in 0..monomials.len() {
            for j in i..monomials.len() {
                let a = monomials[i].combine(&monomials[j]);
                let k = *index.entry(a.clone()).or_insert_with(|| {
                    rows.push((a, Vec::new()));
                    rows.len() - 1
                });
                rows[k].1.push((i, j));
            }
        }
        rows.sort_by_key(|(a, _)| a.position());
        GramSystem { monomials, rows }
    }
}

/// Drops monomials whose square has a zero coefficient in `target` and cannot
/// be formed by any other pair of basis monomials. For such `m` the Gram entry
/// `W[m, m]` must vanish, which forces its whole row to zero when `W >= 0`.
fn prune(target: &Polynomial, mut monomials: Vec<MultiIndex>) -> Vec<MultiIndex> {
    let tol = 1e-12 * (1.0 + target.coeff_norm());
    loop {
        let mut count: HashMap<MultiIndex, usize> = HashMap::new();
        for i in 0..monomials.len() {
            for j in (i + 1)..monomials.len() {
                *count.entry(monomials[i].combine(&monomials[j])).or_default() += 1;
            }
        }
        let before = monomials.len();
        monomials.retain(|m| {
            let sq = m.combine(m);
            target.coeff(&sq).abs() > tol || count.contains_key(&sq)
        });
        if monomials.len() == before {
            return monomials;
        }
    }
}

fn sdp_status_unknown(margin: Option<f64>, status: SolveStatus) -> SosVerdict {
    SosVerdict::Unknown { margin, status }
}

fn certify(target: &Polynomial, sys: GramSystem, opts: &SolverOptions) -> Result<SosVerdict, SosError> {
    let dim = sys.monomials.len();
    let scale = 1.0 + target.coeff_norm();
    let reachable: HashMap<&MultiIndex, ()> = sys.rows.iter().map(|(a, _)| (a, ())).collect();
    // smaller unreachable terms are absorbed by the certificate residual
    for (m, c) in target.terms() {
        if !reachable.contains_key(m) && c.abs() > RESIDUAL_TOL * scale {
            return Ok(SosVerdict::No(Refutation::UnreachableTerm(m.clone())));
        }
    }

    if dim == 0 {
        // every remaining term was small enough to leave in the residual
        return Ok(SosVerdict::Yes(GramCertificate {
            target: target.clone(),
            monomials: Vec::new(),
            gram: SymMatrix::zeros(0),
            margin: 0.0,
            residual: target.coeff_norm(),
        }));
    }

    // variables: P = W - tI in block 0, t free
    let mut prob = SdpProblem::maximize(ConeSpec::new(vec![dim], 0, 1))
        .with_objective(LinearForm::new().free(0, 1.0));
    for (alpha, pairs) in &sys.rows {
        let mut form = LinearForm::new();
        let mut diag = 0.0;
        for &(i, j) in pairs {
            // each unordered off-diagonal pair appears twice in z^T W z
            form.push_psd(0, i, j, if i == j { 1.0 } else { 2.0 });
            if i == j {
                diag += 1.0;
            }
        }
        form.push_free(0, diag);
        prob.add_eq(form, target.coeff(alpha));
    }
    let sol = solve(&prob, opts)?;
    // A stalled iterate is still usable: whatever comes out is verified below.
    let usable = sol.status == SolveStatus::Optimal
        || (sol.status == SolveStatus::NumericalFailure
            && sol.primal_residual <= RESIDUAL_TOL * scale
            && sol.relative_gap <= 1e-6);
    if !usable {
        return Ok(sdp_status_unknown(None, sol.status));
    }
    let t = sol.x.free[0];

    if t >= NEAR_MARGIN {
        let mut gram = sol.x.psd[0].axpy(t, &SymMatrix::identity(dim));
        if t < MARGIN_TOL {
            // optimal margin is zero up to solver noise; keep the certificate
            // only if the clipped Gram matrix still reproduces the target
            gram = clip_psd(&gram);
        }
        let mut cert = GramCertificate {
            target: target.clone(),
            monomials: sys.monomials.clone(),
            gram,
            margin: t,
            residual: 0.0,
        };
        let rec = cert.reconstruct()?;
        cert.residual = rec.sub(target)?.coeff_norm();
        if cert.residual <= RESIDUAL_TOL * scale && cert.min_eig() >= -1e-8 {
            return Ok(SosVerdict::Yes(cert));
        }
        if t >= MARGIN_TOL {
            return Ok(sdp_status_unknown(Some(t), SolveStatus::Optimal));
        }
    }

    // The multipliers are the moments of the dual separator.
    let moments: Vec<(MultiIndex, f64)> = sys
        .rows
        .iter()
        .zip(&sol.multipliers)
        .map(|((a, _), &y)| (a.clone(), y))
        .collect();
    let lookup: HashMap<&MultiIndex, f64> = moments.iter().map(|(a, y)| (a, *y)).collect();
    let mmat = SymMatrix::from_fn(dim, |i, j| {
        lookup[&sys.monomials[i].combine(&sys.monomials[j])]
    });
    let moment_min_eig = mmat.min_eig();
    let value: f64 = target.terms().map(|(m, c)| c * lookup.get(m).copied().unwrap_or(0.0)).sum();
    let norm = mmat.frobenius_norm().max(1e-300);
    if moment_min_eig >= -1e-8 * norm && value < MARGIN_TOL * norm {
        Ok(SosVerdict::No(Refutation::Separator {
            moments,
            value,
            moment_min_eig,
        }))
    } else {
        Ok(sdp_status_unknown(Some(t), SolveStatus::Optimal))
    }
}

/// Nearest PSD matrix in the Frobenius norm.
fn clip_psd(m: &SymMatrix) -> SymMatrix {
    let (values, vectors) = m.eigen();
    SymMatrix::from_fn(m.dim(), |i, j| {
        values
            .iter()
            .zip(&vectors)
            .filter(|(l, _)| **l > 0.0)
            .map(|(l, v)| l * v[i] * v[j])
            .sum()
    })
}

/// Decides whether `f` is a sum of squares.
pub fn is_sos(f: &Polynomial) -> Result<SosVerdict, SosError> {
    is_sos_with(f, &default_options())
}

pub fn is_sos_with(f: &Polynomial, opts: &SolverOptions) -> Result<SosVerdict, SosError> {
    let d = f.degree();
    if d % 2 == 1 {
        return Ok(SosVerdict::No(Refutation::OddDegree));
    }
    let f = f.with_degree_bound(d)?;
    let full = GramSystem::full(f.num_vars(), d / 2)?;
    let kept = prune(&f, full.monomials.clone());
    let sys = if kept.len() == full.monomials.len() {
        full
    } else {
        GramSystem::from_monomials(kept)
    };
    certify(&f, sys, opts)
}

/// `F(x, y) = f(x) - f(y) - grad f(y)^T (x - y)` on `2n` variables `(x, y)`.
pub fn convexity_form(f: &Polynomial) -> Result<Polynomial, PolyError> {
    let n = f.num_vars();
    let fx = f.lift_to_xy(Block::X)?;
    let fy = f.lift_to_xy(Block::Y)?;
    let mut acc = fx.sub(&fy)?;
    for (k, g) in f.gradient().iter().enumerate() {
        let gy = g.lift_to_xy(Block::Y)?;
        let diff = Polynomial::variable(2 * n, k)?.sub(&Polynomial::variable(2 * n, n + k)?)?;
        acc = acc.sub(&gy.mul(&diff)?)?;
    }
    Ok(acc)
}

/// The convexity form in shifted coordinates `(u, y)` with `u = x - y`, where
/// every term has degree at least two in `u`.
pub fn shifted_convexity_form(f: &Polynomial) -> Result<Polynomial, PolyError> {
    let n = f.num_vars();
    let big = convexity_form(f)?;
    let mut images = Vec::with_capacity(2 * n);
    for k in 0..n {
        images.push(Polynomial::variable(2 * n, k)?.add(&Polynomial::variable(2 * n, n + k)?)?);
    }
    for k in 0..n {
        images.push(Polynomial::variable(2 * n, n + k)?);
    }
    Ok(big.substitute(&images)?.trimmed())
}

/// Decides SOS-convexity of `f`.
///
/// The certificate is computed for the convexity form after the invertible
/// change of variables `x = u + y`. That form vanishes to second order in `u`,
/// so every square in a decomposition vanishes at `u = 0` and the Gram basis
/// can be limited to monomials of degree at least one in `u`. The margin then
/// measures genuine slack instead of being pinned at zero by the diagonal
/// `x = y`.
pub fn is_sos_convex(f: &Polynomial) -> Result<SosVerdict, SosError> {
    is_sos_convex_with(f, &default_options())
}

pub fn is_sos_convex_with(f: &Polynomial, opts: &SolverOptions) -> Result<SosVerdict, SosError> {
    let n = f.num_vars();
    let d = f.degree();
    if d % 2 == 1 && d > 1 {
        return Ok(SosVerdict::No(Refutation::OddDegree));
    }
    let g = shifted_convexity_form(f)?;
    let half = d.max(2) / 2;
    let monomials: Vec<MultiIndex> = crate::poly::MonomialBasis::new(2 * n, half)?
        .monomials()
        .iter()
        .filter(|m| m.exponents()[..n].iter().any(|&e| e > 0))
        .cloned()
        .collect();
    let g = g.with_degree_bound(2 * half)?;
    let monomials = prune(&g, monomials);
    certify(&g, GramSystem::from_monomials(monomials), opts)
}

/// A polynomial together with its SOS-convexity certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedSosConvex {
    poly: Polynomial,
    cert: GramCertificate,
}

impl CertifiedSosConvex {
    pub fn certify(f: &Polynomial) -> Result<Self, SosError> {
        match is_sos_convex(f)? {
            SosVerdict::Yes(cert) => Ok(CertifiedSosConvex {
                poly: f.clone(),
                cert,
            }),
            v => Err(SosError::NotCertified(format!("{f}: {}", v.label()))),
        }
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn certificate(&self) -> &GramCertificate {
        &self.cert
    }
}

/// Factors the Gram matrix by diagonally pivoted Cholesky, giving `W = sum_j v_j v_j^T`
/// and the terms `f_j = v_j^T z`.
pub fn extract_decomposition(cert: &GramCertificate) -> Result<SosDecomposition, SosError> {
    let dim = cert.monomials.len();
    let n = cert.target.num_vars();
    let mut s = cert.gram.to_dense();
    let scale = s.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let mut terms = Vec::new();
    let mut used = vec![false; dim];
    loop {
        // first index wins ties so the factorization is stable under permutation-free input
        let mut pivot: Option<usize> = None;
        for k in (0..dim).filter(|&k| !used[k]) {
            if pivot.is_none_or(|p| s[(k, k)] > s[(p, p)]) {
                pivot = Some(k);
            }
        }
        let p = match pivot {
            Some(p) if s[(p, p)] > tol => p,
            _ => break,
        };
        used[p] = true;
        let root = s[(p, p)].sqrt();
        let v: Vec<f64> = (0..dim).map(|i| s[(i, p)] / root).collect();
        for i in 0..dim {
            for j in 0..dim {
                s[(i, j)] -= v[i] * v[j];
            }
        }
        let poly = Polynomial::from_terms(
            n,
            cert.monomials.iter().cloned().zip(v.iter().copied()),
        )?;
        terms.push(poly.trimmed());
    }
    let worst = (0..dim).map(|k| s[(k, k)]).fold(0.0f64, f64::min);
    if worst < -1e-8 * scale.max(1.0) {
        return Err(SosError::Indefinite(worst));
    }
    Ok(SosDecomposition { terms })
}
