//! Dense conic solver for problems over PSD matrix blocks, nonnegative scalars
//! and free scalars, with linear equality and inequality constraints.
//!
//! Problems are written in terms of three variable groups:
//!
//! * `X_k`: symmetric PSD matrices, one per entry of [`ConeSpec::psd_blocks`],
//! * `v`: nonnegative scalars,
//! * `u`: free scalars.
//!
//! A [`LinearForm`] is a sparse linear functional of these. A PSD term
//! `(k, i, j, c)` contributes `c * X_k[i, j]`, so a pairing `Tr(M X_k)` with a
//! symmetric `M` is written as `M[i, i]` on the diagonal and `2 M[i, j]` off it
//! (see [`LinearForm::trace_with`]).
//!
//! The engine is an infeasible-start primal-dual path-following method with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps.

mod ipm;
mod matrix;
mod sdpa;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::{min_eig, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable reference out of range: {0}")]
    BadIndex(String),
    #[error("problem exceeds size limits: {0}")]
    TooLarge(String),
    #[error("PSD blocks must have dimension at least 1")]
    EmptyBlock,
}

pub const MAX_BLOCK_DIM: usize = 200;
pub const MAX_CONSTRAINTS: usize = 5000;

/// Shape of the variable space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub psd_blocks: Vec<usize>,
    pub nonneg_count: usize,
    pub free_count: usize,
}

impl ConeSpec {
    pub fn new(psd_blocks: Vec<usize>, nonneg_count: usize, free_count: usize) -> Self {
        ConeSpec {
            psd_blocks,
            nonneg_count,
            free_count,
        }
    }

    /// Length of the scalarized variable (upper triangles of the blocks plus scalars).
    pub fn scalarized_len(&self) -> usize {
        self.psd_blocks.iter().map(|t| t * (t + 1) / 2).sum::<usize>()
            + self.nonneg_count
            + self.free_count
    }
}

/// Sparse linear functional over the variables of a [`ConeSpec`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub psd: Vec<(usize, usize, usize, f64)>,
    pub nonneg: Vec<(usize, f64)>,
    pub free: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `c * X_block[i, j]`.
    pub fn psd(mut self, block: usize, i: usize, j: usize, c: f64) -> Self {
        self.push_psd(block, i, j, c);
        self
    }

    pub fn nonneg(mut self, idx: usize, c: f64) -> Self {
        self.push_nonneg(idx, c);
        self
    }

    pub fn free(mut self, idx: usize, c: f64) -> Self {
        self.push_free(idx, c);
        self
    }

    pub fn push_psd(&mut self, block: usize, i: usize, j: usize, c: f64) {
        if c != 0.0 {
            let (i, j) = if i >= j { (i, j) } else { (j, i) };
            self.psd.push((block, i, j, c));
        }
    }

    pub fn push_nonneg(&mut self, idx: usize, c: f64) {
        if c != 0.0 {
            self.nonneg.push((idx, c));
        }
    }

    pub fn push_free(&mut self, idx: usize, c: f64) {
        if c != 0.0 {
            self.free.push((idx, c));
        }
    }

    /// Adds `scale * Tr(m X_block)`.
    pub fn push_trace(&mut self, block: usize, m: &SymMatrix, scale: f64) {
        for i in 0..m.dim() {
            for j in 0..i {
                self.push_psd(block, i, j, 2.0 * scale * m.get(i, j));
            }
            self.push_psd(block, i, i, scale * m.get(i, i));
        }
    }

    pub fn trace_with(mut self, block: usize, m: &SymMatrix, scale: f64) -> Self {
        self.push_trace(block, m, scale);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty() && self.nonneg.is_empty() && self.free.is_empty()
    }

    pub fn evaluate(&self, point: &SdpPoint) -> f64 {
        let mut acc = 0.0;
        for &(b, i, j, c) in &self.psd {
            acc += c * point.psd[b].get(i, j);
        }
        for &(k, c) in &self.nonneg {
            acc += c * point.nonneg[k];
        }
        for &(k, c) in &self.free {
            acc += c * point.free[k];
        }
        acc
    }

    fn validate(&self, cone: &ConeSpec, what: &str) -> Result<(), SdpError> {
        for &(b, i, j, c) in &self.psd {
            if !c.is_finite() {
                return Err(SdpError::NonFinite(what.to_string()));
            }
            match cone.psd_blocks.get(b) {
                Some(&t) if i < t && j < t => {}
                _ => {
                    return Err(SdpError::BadIndex(format!(
                        "{what}: PSD entry ({b}, {i}, {j})"
                    )))
                }
            }
        }
        for &(k, c) in &self.nonneg {
            if !c.is_finite() {
                return Err(SdpError::NonFinite(what.to_string()));
            }
            if k >= cone.nonneg_count {
                return Err(SdpError::BadIndex(format!("{what}: nonneg {k}")));
            }
        }
        for &(k, c) in &self.free {
            if !c.is_finite() {
                return Err(SdpError::NonFinite(what.to_string()));
            }
            if k >= cone.free_count {
                return Err(SdpError::BadIndex(format!("{what}: free {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IneqSense {
    /// `form <= rhs`
    Le,
    /// `form >= rhs`
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqConstraint {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IneqConstraint {
    pub form: LinearForm,
    pub rhs: f64,
    pub sense: IneqSense,
}

/// A linear conic program over a [`ConeSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub cone: ConeSpec,
    pub sense: Sense,
    pub objective: LinearForm,
    /// Constant added to the objective value.
    pub offset: f64,
    pub eqs: Vec<EqConstraint>,
    pub ineqs: Vec<IneqConstraint>,
}

impl SdpProblem {
    pub fn new(cone: ConeSpec, sense: Sense) -> Self {
        SdpProblem {
            cone,
            sense,
            objective: LinearForm::new(),
            offset: 0.0,
            eqs: Vec::new(),
            ineqs: Vec::new(),
        }
    }

    pub fn minimize(cone: ConeSpec) -> Self {
        SdpProblem::new(cone, Sense::Minimize)
    }

    pub fn maximize(cone: ConeSpec) -> Self {
        SdpProblem::new(cone, Sense::Maximize)
    }

    pub fn with_objective(mut self, form: LinearForm) -> Self {
        self.objective = form;
        self
    }

    /// Adds `form = rhs` and returns its row index among the equalities.
    pub fn add_eq(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.eqs.push(EqConstraint { form, rhs });
        self.eqs.len() - 1
    }

    pub fn add_le(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.ineqs.push(IneqConstraint {
            form,
            rhs,
            sense: IneqSense::Le,
        });
        self.ineqs.len() - 1
    }

    pub fn add_ge(&mut self, form: LinearForm, rhs: f64) -> usize {
        self.ineqs.push(IneqConstraint {
            form,
            rhs,
            sense: IneqSense::Ge,
        });
        self.ineqs.len() - 1
    }

    pub fn num_constraints(&self) -> usize {
        self.eqs.len() + self.ineqs.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.cone.psd_blocks.iter().any(|&t| t == 0) {
            return Err(SdpError::EmptyBlock);
        }
        if let Some(&t) = self
            .cone
            .psd_blocks
            .iter()
            .find(|&&t| t > MAX_BLOCK_DIM)
        {
            return Err(SdpError::TooLarge(format!(
                "PSD block of dimension {t} (limit {MAX_BLOCK_DIM})"
            )));
        }
        if self.num_constraints() > MAX_CONSTRAINTS {
            return Err(SdpError::TooLarge(format!(
                "{} constraints (limit {MAX_CONSTRAINTS})",
                self.num_constraints()
            )));
        }
        if !self.offset.is_finite() {
            return Err(SdpError::NonFinite("objective offset".into()));
        }
        self.objective.validate(&self.cone, "objective")?;
        for (k, c) in self.eqs.iter().enumerate() {
            let what = format!("equality {k}");
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite(what));
            }
            c.form.validate(&self.cone, &what)?;
        }
        for (k, c) in self.ineqs.iter().enumerate() {
            let what = format!("inequality {k}");
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite(what));
            }
            c.form.validate(&self.cone, &what)?;
        }
        Ok(())
    }

    /// Largest violation of any constraint (cone membership excluded).
    pub fn constraint_violation(&self, point: &SdpPoint) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.eqs {
            worst = worst.max((c.form.evaluate(point) - c.rhs).abs());
        }
        for c in &self.ineqs {
            let v = c.form.evaluate(point) - c.rhs;
            let viol = match c.sense {
                IneqSense::Le => v,
                IneqSense::Ge => -v,
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Largest violation of cone membership: negative eigenvalues of the PSD
    /// blocks and negative entries of the nonnegative part.
    pub fn cone_violation(&self, point: &SdpPoint) -> f64 {
        let mut worst: f64 = 0.0;
        for m in &point.psd {
            worst = worst.max(-m.min_eig());
        }
        for &v in &point.nonneg {
            worst = worst.max(-v);
        }
        worst
    }

    pub fn objective_value(&self, point: &SdpPoint) -> f64 {
        self.objective.evaluate(point) + self.offset
    }

    /// Writes the problem in sparse SDPA format (`.dat-s`).
    pub fn to_sdpa(&self) -> Result<String, SdpError> {
        self.validate()?;
        Ok(sdpa::write(&ipm::StandardForm::from_problem(self)))
    }
}

/// A value for every variable of a [`ConeSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpPoint {
    pub psd: Vec<SymMatrix>,
    pub nonneg: Vec<f64>,
    pub free: Vec<f64>,
}

impl SdpPoint {
    pub fn zeros(cone: &ConeSpec) -> Self {
        SdpPoint {
            psd: cone.psd_blocks.iter().map(|&t| SymMatrix::zeros(t)).collect(),
            nonneg: vec![0.0; cone.nonneg_count],
            free: vec![0.0; cone.free_count],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    /// The objective is unbounded (the dual is infeasible).
    DualInfeasible,
    NumericalFailure,
}

/// Evidence attached to an infeasible or unbounded status.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Multipliers `y` (equalities first, then inequalities) with
    /// `sum_k y_k rhs_k = 1` and `sum_k y_k a_k` nonpositive on the cone, so no
    /// point can satisfy all constraints.
    Infeasibility { multipliers: Vec<f64> },
    /// A direction `r` in the cone that keeps every constraint satisfied along
    /// the ray and strictly improves the objective.
    ImprovingRay { ray: SdpPoint },
}

impl Certificate {
    /// Checks the certificate against `problem`, returning the largest violation
    /// of the conditions that define it.
    pub fn violation(&self, problem: &SdpProblem) -> f64 {
        match self {
            Certificate::Infeasibility { multipliers } => {
                let neq = problem.eqs.len();
                let mut agg = SdpPoint::zeros(&problem.cone);
                let mut rhs = 0.0;
                let mut worst: f64 = 0.0;
                let mut accumulate = |form: &LinearForm, y: f64| {
                    for &(b, i, j, c) in &form.psd {
                        // c * X[i,j] equals Tr(M X) with M[i,j] = M[j,i] = c / 2 off the diagonal
                        let v = if i == j { c } else { 0.5 * c };
                        agg.psd[b].add_to(i, j, y * v);
                    }
                    for &(k, c) in &form.nonneg {
                        agg.nonneg[k] += y * c;
                    }
                    for &(k, c) in &form.free {
                        agg.free[k] += y * c;
                    }
                };
                for (k, c) in problem.eqs.iter().enumerate() {
                    accumulate(&c.form, multipliers[k]);
                    rhs += multipliers[k] * c.rhs;
                }
                for (k, c) in problem.ineqs.iter().enumerate() {
                    let y = multipliers[neq + k];
                    let sign_viol = match c.sense {
                        IneqSense::Le => y,
                        IneqSense::Ge => -y,
                    };
                    worst = worst.max(sign_viol);
                    accumulate(&c.form, y);
                    rhs += y * c.rhs;
                }
                for m in &agg.psd {
                    worst = worst.max(m.max_eig());
                }
                for &v in &agg.nonneg {
                    worst = worst.max(v);
                }
                for &v in &agg.free {
                    worst = worst.max(v.abs());
                }
                worst.max((rhs - 1.0).abs())
            }
            Certificate::ImprovingRay { ray } => {
                let mut worst = problem.cone_violation(ray);
                for c in &problem.eqs {
                    worst = worst.max(c.form.evaluate(ray).abs());
                }
                for c in &problem.ineqs {
                    let v = c.form.evaluate(ray);
                    worst = worst.max(match c.sense {
                        IneqSense::Le => v,
                        IneqSense::Ge => -v,
                    });
                }
                let slope = problem.objective.evaluate(ray);
                let improvement = match problem.sense {
                    Sense::Minimize => -slope,
                    Sense::Maximize => slope,
                };
                // normalized to unit improvement
                worst.max((improvement - 1.0).abs())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Objective value at `x` (including the offset).
    pub primal_value: f64,
    /// Dual objective value (including the offset).
    pub dual_value: f64,
    pub x: SdpPoint,
    /// Dual slack, complementary to `x`; its `free` part is always zero.
    pub dual_slack: SdpPoint,
    /// Constraint multipliers, equalities first then inequalities, as
    /// sensitivities of the optimal value to each right-hand side.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub certificate: Option<Certificate>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    /// Threshold on the normalized infeasibility measure.
    pub infeas_tol: f64,
    /// Consecutive iterations the infeasibility measure must stay below threshold.
    pub infeas_patience: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            infeas_tol: 1e-10,
            infeas_patience: 5,
        }
    }
}

/// Solves `problem`. The objective is rescaled to unit largest coefficient
/// before the interior-point run and the reported values are mapped back, so
/// the returned point does not depend on the scale of the objective.
/// `relative_gap` and `dual_residual` refer to the rescaled objective.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let sigma = objective_scale(&problem.objective);
    if sigma == 1.0 {
        let sf = ipm::StandardForm::from_problem(problem);
        return Ok(sf.to_solution(ipm::run(&sf, opts)));
    }
    let mut p = problem.clone();
    p.objective = scale_form(&problem.objective, 1.0 / sigma);
    p.offset = problem.offset / sigma;
    let sf = ipm::StandardForm::from_problem(&p);
    let mut sol = sf.to_solution(ipm::run(&sf, opts));
    sol.primal_value *= sigma;
    sol.dual_value *= sigma;
    sol.multipliers.iter_mut().for_each(|y| *y *= sigma);
    sol.dual_slack = scale_point(&sol.dual_slack, sigma);
    if let Some(Certificate::ImprovingRay { ray }) = &mut sol.certificate {
        *ray = scale_point(ray, 1.0 / sigma);
    }
    Ok(sol)
}

fn objective_scale(f: &LinearForm) -> f64 {
    let m = f
        .psd
        .iter()
        .map(|t| t.3.abs())
        .chain(f.nonneg.iter().chain(&f.free).map(|t| t.1.abs()))
        .fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn scale_form(f: &LinearForm, a: f64) -> LinearForm {
    LinearForm {
        psd: f.psd.iter().map(|&(b, i, j, c)| (b, i, j, a * c)).collect(),
        nonneg: f.nonneg.iter().map(|&(k, c)| (k, a * c)).collect(),
        free: f.free.iter().map(|&(k, c)| (k, a * c)).collect(),
    }
}

fn scale_point(x: &SdpPoint, a: f64) -> SdpPoint {
    SdpPoint {
        psd: x.psd.iter().map(|m| m.scale(a)).collect(),
        nonneg: x.nonneg.iter().map(|v| a * v).collect(),
        free: x.free.iter().map(|v| a * v).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(SdpPoint),
    Infeasible(Certificate),
    Unknown,
}

/// Decides whether the constraints of `problem` admit a point; the objective is ignored.
pub fn check_feasible(problem: &SdpProblem, opts: &SolverOptions) -> Result<Feasibility, SdpError> {
    let mut p = problem.clone();
    p.objective = LinearForm::new();
    p.offset = 0.0;
    p.sense = Sense::Minimize;
    let sol = solve(&p, opts)?;
    Ok(match sol.status {
        SolveStatus::Optimal => {
            let viol = p
                .constraint_violation(&sol.x)
                .max(p.cone_violation(&sol.x));
            if viol <= 10.0 * opts.feas_tol * (1.0 + rhs_scale(&p)) {
                Feasibility::Feasible(sol.x)
            } else {
                Feasibility::Unknown
            }
        }
        SolveStatus::PrimalInfeasible => match sol.certificate {
            Some(c) => Feasibility::Infeasible(c),
            None => Feasibility::Unknown,
        },
        _ => Feasibility::Unknown,
    })
}

fn rhs_scale(p: &SdpProblem) -> f64 {
    p.eqs
        .iter()
        .map(|c| c.rhs.abs())
        .chain(p.ineqs.iter().map(|c| c.rhs.abs()))
        .fold(0.0, f64::max)
}
