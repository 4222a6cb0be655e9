//! The single-level SDP relaxation of an [`SsaProgram`], its moment dual, and
//! recovery of a minimizer from first-order moments.
//!
//! Primal: maximize `mu` such that
//! `h0^0 + sum_j lam^0_j h_j^0 + sum_i (lam^i_0 h_0^i + sum_j lam^i_j h_j^i) - mu`
//! has a PSD Gram matrix `W`, the objective's pencil
//! `A_0^0 + sum_j lam^0_j A_j^0 + sum_l z^0_l B_l^0` is PSD, every constraint's
//! homogenized pencil `lam^i_0 A_0^i + sum_j lam^i_j A_j^i + sum_l z^i_l B_l^i`
//! is PSD, and `lam^i_0 >= 0`.
//!
//! Dual: minimize `L_y(h_0^0) + Tr(Z_0 A_0^0)` over moment vectors `y` with
//! `y_1 = 1` and `M_r(y) >= 0`, and over `Z_i >= 0`, subject to
//! `L_y(h_0^i) + Tr(Z_i A_0^i) <= 0`, `L_y(h_j^i) + Tr(Z_i A_j^i) = 0` and
//! `Tr(Z_i B_l^i) = 0`.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::poly::{GramPairing, MonomialBasis, PolyError, Polynomial};
use crate::sdp::{
    solve, ConeSpec, LinearForm, SdpError, SdpProblem, SdpSolution, SolveStatus, SolverOptions,
    SymMatrix,
};
use crate::soscert::CertifiedSosConvex;
use crate::spectra::{SpectraError, Spectrahedron};
use crate::ssafunc::{SlaterSearch, SlaterWitness, SsaError, SsaFunction, SsaProgram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Ssa(#[from] SsaError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("moment vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("polynomial of degree {got} exceeds the moment degree {max}")]
    DegreeMismatch { got: u32, max: u32 },
    #[error("no strictly feasible point found (best worst-case margin {worst:e}); pass assume_slater to proceed")]
    NoSlaterPoint { worst: f64, best: Vec<f64> },
    #[error("dual relaxation is not solved to optimality ({0:?})")]
    NotOptimal(SolveStatus),
}

/// A truncated moment sequence `y` indexed by the graded basis of degree `2r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    n: usize,
    r: u32,
    y: Vec<f64>,
}

impl MomentVector {
    pub fn new(n: usize, r: u32, y: Vec<f64>) -> Result<Self, RelaxError> {
        let expected = crate::poly::basis_size(n, 2 * r)?;
        if y.len() != expected {
            return Err(RelaxError::LengthMismatch {
                expected,
                got: y.len(),
            });
        }
        Ok(MomentVector { n, r, y })
    }

    /// Moments of the point mass at `x`: `y = x^(2r)`.
    pub fn dirac(x: &[f64], r: u32) -> Result<Self, RelaxError> {
        let basis = MonomialBasis::new(x.len(), 2 * r)?;
        let y = basis.evaluate_monomials(x)?;
        Ok(MomentVector { n: x.len(), r, y })
    }

    /// `sum_k w_k dirac(x_k)`.
    pub fn mixture(points: &[(f64, Vec<f64>)], r: u32) -> Result<Self, RelaxError> {
        let n = points.first().map(|p| p.1.len()).unwrap_or(1);
        let mut y = vec![0.0; crate::poly::basis_size(n, 2 * r)?];
        for (w, x) in points {
            let d = Self::dirac(x, r)?;
            for (a, b) in y.iter_mut().zip(&d.y) {
                *a += w * b;
            }
        }
        Ok(MomentVector { n, r, y })
    }

    /// Moments of the uniform distribution on the cube `center + [-1, 1]^n`.
    /// Its moment matrix is positive definite and its mean is `center`.
    pub fn uniform_box(center: &[f64], r: u32) -> Result<Self, RelaxError> {
        let n = center.len();
        let basis = MonomialBasis::new(n, 2 * r)?;
        // one-dimensional moments E[(c + u)^a] for u uniform on [-1, 1]
        let per_axis: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                (0..=2 * r)
                    .map(|a| {
                        let mut binom = 1.0;
                        let mut acc = 0.0;
                        for j in 0..=a {
                            if j % 2 == 0 {
                                acc += binom * c.powi((a - j) as i32) / f64::from(j + 1);
                            }
                            binom = binom * f64::from(a - j) / f64::from(j + 1);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let y = basis
            .monomials()
            .iter()
            .map(|e| {
                e.exponents()
                    .iter()
                    .zip(&per_axis)
                    .map(|(&a, m)| m[a as usize])
                    .product()
            })
            .collect();
        Ok(MomentVector { n, r, y })
    }

    /// Pulls a moment vector whose moment matrix is slightly indefinite back
    /// into the PSD cone by mixing in [`MomentVector::uniform_box`] around its
    /// own mean, which leaves `y_0` and the first moments unchanged. Returns the
    /// mixing weight, zero when no change was needed.
    pub fn repair_psd(&mut self) -> Result<f64, RelaxError> {
        let lam = self.moment_matrix()?.min_eig();
        if lam >= 0.0 {
            return Ok(0.0);
        }
        let mut mean = self.first_moments();
        let scale = self.y[0];
        mean.iter_mut().for_each(|v| *v /= scale);
        let other = Self::uniform_box(&mean, self.r)?;
        let lam_u = scale * other.moment_matrix()?.min_eig();
        // (1 - eps) lam + eps lam_u >= |lam| with eps below
        let eps = (2.0 * -lam / (lam_u - lam)).min(1.0);
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a = (1.0 - eps) * *a + eps * scale * b;
        }
        Ok(eps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_degree(&self) -> u32 {
        self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// `L_y(u) = sum_a u_a y_a`.
    pub fn riesz(&self, u: &Polynomial) -> Result<f64, RelaxError> {
        riesz(self, u)
    }

    pub fn moment_matrix(&self) -> Result<SymMatrix, RelaxError> {
        moment_matrix(&self.y, self.n, self.r)
    }

    /// `(L_y(X_1), ..., L_y(X_n))`, read from positions `2..n+1` of the basis.
    pub fn first_moments(&self) -> Vec<f64> {
        self.y[1..=self.n].to_vec()
    }
}

pub fn riesz(y: &MomentVector, u: &Polynomial) -> Result<f64, RelaxError> {
    if u.num_vars() != y.n {
        return Err(PolyError::DimensionMismatch {
            expected: y.n,
            got: u.num_vars(),
        }
        .into());
    }
    if u.degree() > 2 * y.r {
        return Err(RelaxError::DegreeMismatch {
            got: u.degree(),
            max: 2 * y.r,
        });
    }
    Ok(u.coeffs()
        .iter()
        .zip(&y.y)
        .map(|(c, m)| c * m)
        .sum())
}

/// `M_r(y)` with entry `(b, g)` equal to `y` at the product monomial.
pub fn moment_matrix(y: &[f64], n: usize, r: u32) -> Result<SymMatrix, RelaxError> {
    let pairing = GramPairing::shared(n, r)?;
    if y.len() != pairing.num_monomials() {
        return Err(RelaxError::LengthMismatch {
            expected: pairing.num_monomials(),
            got: y.len(),
        });
    }
    Ok(SymMatrix::from_fn(pairing.gram_dim(), |i, j| {
        y[pairing.alpha_of(i, j)]
    }))
}

/// `L_y(f) - f(L_y(X_1), ..., L_y(X_n))`, nonnegative for SOS-convex `f`.
pub fn jensen_gap(y: &MomentVector, f: &CertifiedSosConvex) -> Result<f64, RelaxError> {
    let lhs = riesz(y, f.poly())?;
    let rhs = f.poly().evaluate(&y.first_moments())?;
    Ok(lhs - rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOptions {
    pub solver: SolverOptions,
    /// Continue when no Slater point is found.
    pub assume_slater: bool,
    /// Attempt to recover a minimizer.
    pub recovery: bool,
    pub slater_hint: Option<Vec<f64>>,
    /// Pad every index set to a common dimension with inert coordinates.
    pub uniform_m: bool,
    /// Run the two SDP solves on separate threads.
    pub concurrent: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            solver: SolverOptions::default(),
            assume_slater: false,
            recovery: true,
            slater_hint: None,
            uniform_m: true,
            concurrent: true,
        }
    }
}

/// Adds `extra` inert index coordinates `y_j in [-1, 1]` with `h_j = 0`.
fn pad(f: &SsaFunction, extra: usize) -> Result<(Vec<Polynomial>, Spectrahedron), RelaxError> {
    let mut h = f.h().to_vec();
    if extra == 0 {
        return Ok((h, f.omega().clone()));
    }
    let n = f.n();
    for _ in 0..extra {
        h.push(Polynomial::zero(n)?);
    }
    let b = Spectrahedron::box_set(&vec![-1.0; extra], &vec![1.0; extra])?;
    let omega = if f.m() == 0 {
        b
    } else {
        f.omega().product(&b)
    };
    Ok((h, omega))
}

/// The pieces of one function as used in the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    /// Dense coefficients of `h_0..h_m` over the degree-`d` basis.
    pub h: Vec<Vec<f64>>,
    pub omega: Spectrahedron,
}

impl Piece {
    pub fn m(&self) -> usize {
        self.omega.m()
    }

    /// Whether the pencil carries variables and so needs its own PSD block.
    pub fn has_block(&self) -> bool {
        self.omega.m() + self.omega.p() > 0
    }
}

/// Program data shared by the primal and the dual.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub n: usize,
    pub d: u32,
    /// Objective first, then constraints.
    pub pieces: Vec<Piece>,
}

impl Assembly {
    pub fn new(prog: &SsaProgram, uniform_m: bool) -> Result<Self, RelaxError> {
        let d = prog.degree();
        let n = prog.n();
        let fs: Vec<&SsaFunction> = std::iter::once(prog.objective())
            .chain(prog.constraints())
            .collect();
        let m_max = fs.iter().map(|f| f.m()).max().unwrap_or(0);
        let mut pieces = Vec::with_capacity(fs.len());
        for f in fs {
            let extra = if uniform_m { m_max - f.m() } else { 0 };
            let (h, omega) = pad(f, extra)?;
            let h = h
                .iter()
                .map(|p| Ok(p.with_degree_bound(d)?.coeffs().to_vec()))
                .collect::<Result<Vec<_>, RelaxError>>()?;
            pieces.push(Piece { h, omega });
        }
        Ok(Assembly { n, d, pieces })
    }

    pub fn num_constraints(&self) -> usize {
        self.pieces.len() - 1
    }

    pub fn pairing(&self) -> Result<std::sync::Arc<GramPairing>, RelaxError> {
        Ok(GramPairing::shared(self.n, self.d / 2)?)
    }
}

/// Positions of the primal variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalLayout {
    pub mu: usize,
    /// Free indices of `lam^i_1..lam^i_m`, per function.
    pub lambda: Vec<Vec<usize>>,
    /// Free indices of `z^i`, per function.
    pub z: Vec<Vec<usize>>,
    /// Nonnegative index of `lam^i_0` for constraint `i >= 1` (entry 0 unused).
    pub lambda0: Vec<Option<usize>>,
    pub gram_block: usize,
    /// PSD block holding each function's pencil, if it has one.
    pub lmi_block: Vec<Option<usize>>,
    /// Equality row of the coefficient equation for each basis position.
    pub coefficient_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalRelaxation {
    pub problem: SdpProblem,
    pub layout: PrimalLayout,
    pub assembly: Assembly,
}

/// Positions of the dual variables and row families.
#[derive(Debug, Clone, PartialEq)]
pub struct DualLayout {
    /// `y_alpha` is read from `M[canonical[alpha]]`.
    pub canonical: Vec<(usize, usize)>,
    pub moment_block: usize,
    pub z_block: Vec<Option<usize>>,
    /// Inequality rows, one per constraint.
    pub ineq_rows: Vec<usize>,
    /// Equality rows for the `A_j` couplings, per function.
    pub a_rows: Vec<Vec<usize>>,
    /// Equality rows for the `B_l` couplings, per function.
    pub b_rows: Vec<Vec<usize>>,
    /// Rows tying every other entry of `M` to its canonical entry.
    pub link_rows: std::ops::Range<usize>,
    pub normalization_row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualRelaxation {
    pub problem: SdpProblem,
    pub layout: DualLayout,
    pub assembly: Assembly,
}

pub fn build_primal(prog: &SsaProgram, uniform_m: bool) -> Result<PrimalRelaxation, RelaxError> {
    primal_from_assembly(Assembly::new(prog, uniform_m)?)
}

pub fn primal_from_assembly(assembly: Assembly) -> Result<PrimalRelaxation, RelaxError> {
    let pairing = assembly.pairing()?;
    let nfun = assembly.pieces.len();

    let mut nfree = 1;
    let mut lambda = Vec::with_capacity(nfun);
    let mut z = Vec::with_capacity(nfun);
    for piece in &assembly.pieces {
        lambda.push((nfree..nfree + piece.m()).collect::<Vec<_>>());
        nfree += piece.m();
        z.push((nfree..nfree + piece.omega.p()).collect::<Vec<_>>());
        nfree += piece.omega.p();
    }
    let lambda0: Vec<Option<usize>> = (0..nfun).map(|i| i.checked_sub(1)).collect();
    let mut blocks = vec![pairing.gram_dim()];
    let mut lmi_block = Vec::with_capacity(nfun);
    for piece in &assembly.pieces {
        if piece.has_block() {
            lmi_block.push(Some(blocks.len()));
            blocks.push(piece.omega.t());
        } else {
            lmi_block.push(None);
        }
    }
    let cone = ConeSpec::new(blocks, nfun - 1, nfree);
    let mut problem = SdpProblem::maximize(cone).with_objective(LinearForm::new().free(0, 1.0));

    let mut coefficient_rows = Vec::with_capacity(pairing.num_monomials());
    for alpha in 0..pairing.num_monomials() {
        let mut form = LinearForm::new();
        for &(b, g) in pairing.pairs(alpha) {
            form.push_psd(0, b, g, if b == g { 1.0 } else { 2.0 });
        }
        if alpha == 0 {
            form.push_free(0, 1.0);
        }
        for (i, piece) in assembly.pieces.iter().enumerate() {
            for (j, &var) in lambda[i].iter().enumerate() {
                form.push_free(var, -piece.h[j + 1][alpha]);
            }
            if let Some(k) = lambda0[i] {
                form.push_nonneg(k, -piece.h[0][alpha]);
            }
        }
        coefficient_rows.push(problem.add_eq(form, assembly.pieces[0].h[0][alpha]));
    }

    for (i, piece) in assembly.pieces.iter().enumerate() {
        let Some(blk) = lmi_block[i] else { continue };
        let om = &piece.omega;
        for a in 0..om.t() {
            for b in 0..=a {
                let mut form = LinearForm::new().psd(blk, a, b, 1.0);
                for (j, &var) in lambda[i].iter().enumerate() {
                    form.push_free(var, -om.a()[j].get(a, b));
                }
                for (l, &var) in z[i].iter().enumerate() {
                    form.push_free(var, -om.b()[l].get(a, b));
                }
                let rhs = match lambda0[i] {
                    None => om.a0().get(a, b),
                    Some(k) => {
                        form.push_nonneg(k, -om.a0().get(a, b));
                        0.0
                    }
                };
                problem.add_eq(form, rhs);
            }
        }
    }

    Ok(PrimalRelaxation {
        problem,
        layout: PrimalLayout {
            mu: 0,
            lambda,
            z,
            lambda0,
            gram_block: 0,
            lmi_block,
            coefficient_rows,
        },
        assembly,
    })
}

pub fn build_dual(prog: &SsaProgram, uniform_m: bool) -> Result<DualRelaxation, RelaxError> {
    dual_from_assembly(Assembly::new(prog, uniform_m)?)
}

pub fn dual_from_assembly(assembly: Assembly) -> Result<DualRelaxation, RelaxError> {
    let pairing = assembly.pairing()?;
    let nmom = pairing.num_monomials();
    let nfun = assembly.pieces.len();
    let mut blocks = vec![pairing.gram_dim()];
    let mut z_block = Vec::with_capacity(nfun);
    for piece in &assembly.pieces {
        if piece.has_block() {
            z_block.push(Some(blocks.len()));
            blocks.push(piece.omega.t());
        } else {
            z_block.push(None);
        }
    }
    let cone = ConeSpec::new(blocks, 0, 0);
    let canonical: Vec<(usize, usize)> = (0..nmom).map(|a| pairing.pairs(a)[0]).collect();

    // L_y(h) + scale * Tr(Z A)
    let coupling = |h: &[f64], zb: Option<usize>, a: Option<&SymMatrix>| {
        let mut form = LinearForm::new();
        for (alpha, &c) in h.iter().enumerate() {
            let (b, g) = canonical[alpha];
            form.push_psd(0, b, g, c);
        }
        if let (Some(blk), Some(a)) = (zb, a) {
            form.push_trace(blk, a, 1.0);
        }
        form
    };

    let obj_piece = &assembly.pieces[0];
    let objective = coupling(&obj_piece.h[0], z_block[0], Some(obj_piece.omega.a0()));
    let mut problem = SdpProblem::minimize(cone).with_objective(objective);

    let mut ineq_rows = Vec::new();
    for (i, piece) in assembly.pieces.iter().enumerate().skip(1) {
        let form = coupling(&piece.h[0], z_block[i], Some(piece.omega.a0()));
        ineq_rows.push(problem.add_le(form, 0.0));
    }
    let mut a_rows = Vec::with_capacity(nfun);
    let mut b_rows = Vec::with_capacity(nfun);
    for (i, piece) in assembly.pieces.iter().enumerate() {
        let mut rows = Vec::with_capacity(piece.m());
        for j in 0..piece.m() {
            let form = coupling(&piece.h[j + 1], z_block[i], Some(&piece.omega.a()[j]));
            rows.push(problem.add_eq(form, 0.0));
        }
        a_rows.push(rows);
        let mut rows = Vec::with_capacity(piece.omega.p());
        for bl in piece.omega.b() {
            let form = coupling(&[], z_block[i], Some(bl));
            rows.push(problem.add_eq(form, 0.0));
        }
        b_rows.push(rows);
    }

    let link_start = problem.eqs.len();
    for (alpha, &(b0, g0)) in canonical.iter().enumerate() {
        for &(b, g) in &pairing.pairs(alpha)[1..] {
            let form = LinearForm::new().psd(0, b, g, 1.0).psd(0, b0, g0, -1.0);
            problem.add_eq(form, 0.0);
        }
    }
    let link_rows = link_start..problem.eqs.len();
    let normalization_row = problem.add_eq(LinearForm::new().psd(0, 0, 0, 1.0), 1.0);

    Ok(DualRelaxation {
        problem,
        layout: DualLayout {
            canonical,
            moment_block: 0,
            z_block,
            ineq_rows,
            a_rows,
            b_rows,
            link_rows,
            normalization_row,
        },
        assembly,
    })
}

impl DualRelaxation {
    /// The moment vector of a dual solution, read from the moment block as
    /// the average over every entry sharing a monomial.
    pub fn moments(&self, sol: &SdpSolution) -> Result<MomentVector, RelaxError> {
        let pairing = self.assembly.pairing()?;
        let block = &sol.x.psd[self.layout.moment_block];
        let y = (0..pairing.num_monomials())
            .map(|a| {
                let pairs = pairing.pairs(a);
                pairs.iter().map(|&(b, g)| block.get(b, g)).sum::<f64>() / pairs.len() as f64
            })
            .collect();
        MomentVector::new(self.assembly.n, self.assembly.d / 2, y)
    }
}

impl PrimalRelaxation {
    /// Moment estimate carried by the multipliers of the coefficient equations.
    pub fn moments_from_multipliers(&self, sol: &SdpSolution) -> Result<MomentVector, RelaxError> {
        let y = self
            .layout
            .coefficient_rows
            .iter()
            .map(|&r| sol.multipliers[r])
            .collect();
        MomentVector::new(self.assembly.n, self.assembly.d / 2, y)
    }
}

/// Residual and gap level at which a stalled solve still counts as solved.
pub const NEAR_OPTIMAL_TOL: f64 = 1e-6;

/// The status of `sol`, promoting a stalled iterate that is accurate to
/// [`NEAR_OPTIMAL_TOL`] to `Optimal`.
pub fn effective_status(sol: &SdpSolution) -> SolveStatus {
    let near = sol.primal_residual <= NEAR_OPTIMAL_TOL
        && sol.dual_residual <= NEAR_OPTIMAL_TOL
        && sol.relative_gap <= NEAR_OPTIMAL_TOL;
    if sol.status == SolveStatus::NumericalFailure && near {
        SolveStatus::Optimal
    } else {
        sol.status
    }
}

/// `x*_k = y*` at the position of the monomial `x_k`.
pub fn recover(dual: &DualRelaxation, sol: &SdpSolution) -> Result<Vec<f64>, RelaxError> {
    if effective_status(sol) != SolveStatus::Optimal {
        return Err(RelaxError::NotOptimal(sol.status));
    }
    Ok(dual.moments(sol)?.first_moments())
}

/// Outcome category of an end-to-end solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recovery {
    Recovered,
    Disabled,
    /// The strict-feasibility check failed for the index set of function `function`.
    ConditionFailed { function: usize, margin: f64 },
    /// Recovery needs an optimal dual solve.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: ReportStatus,
    pub val_primal: f64,
    pub val_dual: f64,
    pub x_star: Option<Vec<f64>>,
    /// `f_i(x*)` for every constraint.
    pub margins: Vec<f64>,
    pub objective_at_x: Option<f64>,
    /// `|f_0(x*) - val_dual|`.
    pub objective_gap: Option<f64>,
    pub primal_status: SolveStatus,
    pub dual_status: SolveStatus,
    pub iterations: [usize; 2],
    pub recovery: Recovery,
    pub slater: Option<SlaterWitness>,
    pub warnings: Vec<String>,
    pub moments: Option<MomentVector>,
    pub wallclock_ms: u128,
}

impl SolveReport {
    /// Checks the recovered point and the duality gap against the acceptance tolerances.
    pub fn verified(&self) -> bool {
        let scale = 1.0 + self.val_dual.abs();
        self.status == ReportStatus::Optimal
            && self.x_star.is_some()
            && self.margins.iter().all(|&m| m <= 1e-6)
            && self.objective_gap.is_some_and(|g| g <= 1e-5 * scale)
            && (self.val_primal - self.val_dual).abs() <= 1e-5 * scale
    }
}

fn classify(primal: &SdpSolution, dual: &SdpSolution) -> ReportStatus {
    use SolveStatus::*;
    match (effective_status(primal), effective_status(dual)) {
        (_, PrimalInfeasible) | (DualInfeasible, _) => ReportStatus::Infeasible,
        (_, DualInfeasible) | (PrimalInfeasible, _) => ReportStatus::Unbounded,
        (Optimal, Optimal) => ReportStatus::Optimal,
        _ => ReportStatus::NumericalFailure,
    }
}

/// Smallest interior margin over the index sets, with the function attaining it.
pub fn recovery_condition(assembly: &Assembly) -> Result<(usize, f64), RelaxError> {
    let mut worst = (0, f64::INFINITY);
    for (i, piece) in assembly.pieces.iter().enumerate() {
        let t = if piece.has_block() {
            piece.omega.interior_margin()?.0
        } else {
            piece.omega.a0().min_eig()
        };
        if t < worst.1 {
            worst = (i, t);
        }
    }
    Ok(worst)
}

/// Required interior margin for recovery.
pub const RECOVERY_MARGIN: f64 = 1e-8;

/// Solves the relaxation and its dual and recovers a minimizer.
pub fn solve_program(prog: &SsaProgram, opts: &RelaxOptions) -> Result<SolveReport, RelaxError> {
    let start = Instant::now();
    let mut warnings = Vec::new();

    let slater = if prog.constraints().is_empty() {
        None
    } else {
        match prog.find_slater(opts.slater_hint.as_deref())? {
            SlaterSearch::Witness(w) => Some(w),
            SlaterSearch::NotFound { best } => {
                let worst = best.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !opts.assume_slater {
                    return Err(RelaxError::NoSlaterPoint {
                        worst,
                        best: best.x0,
                    });
                }
                warnings.push(format!(
                    "no strictly feasible point found (best worst-case margin {worst:e}); exactness is not guaranteed"
                ));
                None
            }
        }
    };

    let assembly = Assembly::new(prog, opts.uniform_m)?;
    let primal = primal_from_assembly(assembly.clone())?;
    let dual = dual_from_assembly(assembly.clone())?;
    let (psol, dsol) = if opts.concurrent {
        std::thread::scope(|s| {
            let hp = s.spawn(|| solve(&primal.problem, &opts.solver));
            let dsol = solve(&dual.problem, &opts.solver);
            (hp.join().expect("primal solve panicked"), dsol)
        })
    } else {
        (solve(&primal.problem, &opts.solver), solve(&dual.problem, &opts.solver))
    };
    let (psol, dsol) = (psol?, dsol?);

    let status = classify(&psol, &dsol);
    for (name, sol) in [("primal", &psol), ("dual", &dsol)] {
        if sol.status != effective_status(sol) {
            warnings.push(format!(
                "{name} solve stalled at relative gap {:e}; accepted at reduced accuracy",
                sol.relative_gap
            ));
        }
    }
    let scale = 1.0 + dsol.primal_value.abs();
    if status == ReportStatus::Optimal && (psol.primal_value - dsol.primal_value).abs() > 1e-5 * scale {
        warnings.push(format!(
            "relaxation values differ: primal {} vs dual {}",
            psol.primal_value, dsol.primal_value
        ));
    }

    let moments = if effective_status(&dsol) == SolveStatus::Optimal {
        let mut y = dual.moments(&dsol)?;
        let eps = y.repair_psd()?;
        if eps > 1e-6 {
            warnings.push(format!("moment matrix was indefinite; mixed with weight {eps:e} to restore it"));
        }
        Some(y)
    } else {
        None
    };

    let mut recovery = Recovery::Unavailable;
    let mut x_star = None;
    if !opts.recovery {
        recovery = Recovery::Disabled;
    } else if let Some(y) = &moments {
        let (function, margin) = recovery_condition(&assembly)?;
        if margin > RECOVERY_MARGIN {
            recovery = Recovery::Recovered;
            x_star = Some(y.first_moments());
        } else {
            recovery = Recovery::ConditionFailed { function, margin };
            warnings.push(format!(
                "index set of function {function} has no strictly feasible pencil (margin {margin:e}); minimizer withheld"
            ));
        }
    }

    let mut margins = Vec::new();
    let mut objective_at_x = None;
    let mut objective_gap = None;
    if let Some(x) = &x_star {
        margins = prog.margins(x)?;
        let f0 = prog.objective().eval(x)?;
        objective_at_x = Some(f0);
        objective_gap = Some((f0 - dsol.primal_value).abs());
        if let Some(bad) = margins.iter().position(|&m| m > 1e-6) {
            warnings.push(format!(
                "recovered point violates constraint {} by {:e}",
                bad + 1,
                margins[bad]
            ));
        }
    }

    Ok(SolveReport {
        status,
        val_primal: psol.primal_value,
        val_dual: dsol.primal_value,
        x_star,
        margins,
        objective_at_x,
        objective_gap,
        primal_status: psol.status,
        dual_status: dsol.status,
        iterations: [psol.iterations, dsol.iterations],
        recovery,
        slater,
        warnings,
        moments,
        wallclock_ms: start.elapsed().as_millis(),
    })
}
