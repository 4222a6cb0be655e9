//! Spectrahedral index sets `{y : exists z, A0 + sum_j y_j A_j + sum_l z_l B_l >= 0}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sdp::{
    check_feasible, solve, Certificate, ConeSpec, Feasibility, LinearForm, SdpError, SdpProblem,
    Sense, SolveStatus, SolverOptions, SymMatrix,
};

/// Largest vertex list kept for products and boxes.
const MAX_VERTICES: usize = 4096;
/// Membership slack on the smallest eigenvalue.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("invalid spectrahedron: {0}")]
    Invalid(String),
    #[error("the spectrahedron is empty")]
    Empty,
    #[error("the spectrahedron is unbounded along {lambda:?}")]
    Unbounded { lambda: Vec<f64>, v: Vec<f64> },
    #[error("solver failed: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrahedron {
    a0: SymMatrix,
    a: Vec<SymMatrix>,
    b: Vec<SymMatrix>,
    /// Finite set whose convex hull is the whole set, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Yes(Vec<f64>),
    No,
}

impl Membership {
    pub fn is_yes(&self) -> bool {
        matches!(self, Membership::Yes(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMax {
    pub value: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundedness {
    /// Coordinate ranges `(min y_j, max y_j)`.
    Bounded(Vec<(f64, f64)>),
    /// A recession direction `(lambda, v)` with `sum lambda_j A_j + sum v_l B_l >= 0`.
    UnboundedAlong { lambda: Vec<f64>, v: Vec<f64> },
}

fn lmi_options() -> SolverOptions {
    SolverOptions::default()
}

impl Spectrahedron {
    /// Builds and validates a spectrahedron; fails if it is empty or unbounded.
    pub fn from_lmi(a0: SymMatrix, a: Vec<SymMatrix>, b: Vec<SymMatrix>) -> Result<Self, SpectraError> {
        let s = Self::unchecked(a0, a, b)?;
        s.validate()?;
        Ok(s)
    }

    /// Checks shapes and finiteness only.
    pub fn unchecked(a0: SymMatrix, a: Vec<SymMatrix>, b: Vec<SymMatrix>) -> Result<Self, SpectraError> {
        let t = a0.dim();
        if t == 0 {
            return Err(SpectraError::Invalid("LMI block must be at least 1x1".into()));
        }
        for (k, m) in a.iter().chain(&b).enumerate() {
            if m.dim() != t {
                return Err(SpectraError::Invalid(format!(
                    "matrix {} has size {}, expected {t}",
                    k + 1,
                    m.dim()
                )));
            }
        }
        if !a0.is_finite() || a.iter().chain(&b).any(|m| !m.is_finite()) {
            return Err(SpectraError::Invalid("non-finite LMI entry".into()));
        }
        Ok(Spectrahedron {
            a0,
            a,
            b,
            vertices: None,
        })
    }

    fn with_vertices(mut self, v: Vec<Vec<f64>>) -> Self {
        self.vertices = Some(v);
        self
    }

    /// Nonemptiness and boundedness.
    pub fn validate(&self) -> Result<(), SpectraError> {
        match check_feasible(&self.lmi_problem(None), &lmi_options())? {
            Feasibility::Feasible(_) => {}
            Feasibility::Infeasible(_) => return Err(SpectraError::Empty),
            Feasibility::Unknown => {
                return Err(SpectraError::Numerical("could not decide nonemptiness".into()))
            }
        }
        match self.assert_bounded()? {
            Boundedness::Bounded(_) => Ok(()),
            Boundedness::UnboundedAlong { lambda, v } => Err(SpectraError::Unbounded { lambda, v }),
        }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    /// Size of the LMI block.
    pub fn t(&self) -> usize {
        self.a0.dim()
    }

    pub fn a0(&self) -> &SymMatrix {
        &self.a0
    }

    pub fn a(&self) -> &[SymMatrix] {
        &self.a
    }

    pub fn b(&self) -> &[SymMatrix] {
        &self.b
    }

    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }

    /// `A0 + sum y_j A_j + sum z_l B_l`.
    pub fn pencil(&self, y: &[f64], z: &[f64]) -> SymMatrix {
        let mut acc = self.a0.clone();
        for (yj, aj) in y.iter().zip(&self.a) {
            acc = acc.axpy(*yj, aj);
        }
        for (zl, bl) in z.iter().zip(&self.b) {
            acc = acc.axpy(*zl, bl);
        }
        acc
    }

    // S - sum y_j A_j - sum z_l B_l - t I = A0 over the lower triangle, with
    // free variables (y, z) and, when `margin` is set, t <= margin as the last free variable.
    fn lmi_problem(&self, margin: Option<f64>) -> SdpProblem {
        let (m, p, t) = (self.m(), self.p(), self.t());
        let nfree = m + p + usize::from(margin.is_some());
        let mut prob = SdpProblem::minimize(ConeSpec::new(vec![t], 0, nfree));
        for i in 0..t {
            for j in 0..=i {
                let mut form = LinearForm::new().psd(0, i, j, 1.0);
                for (k, ak) in self.a.iter().enumerate() {
                    form.push_free(k, -ak.get(i, j));
                }
                for (l, bl) in self.b.iter().enumerate() {
                    form.push_free(m + l, -bl.get(i, j));
                }
                if margin.is_some() && i == j {
                    form.push_free(m + p, 1.0);
                }
                prob.add_eq(form, self.a0.get(i, j));
            }
        }
        if let Some(cap) = margin {
            prob.add_le(LinearForm::new().free(m + p, 1.0), cap);
        }
        prob
    }

    /// Largest `t <= 1` with `A0 + sum y_j A_j + sum z_l B_l - tI >= 0` for some `(y, z)`,
    /// with the maximizing `(y, z)`.
    pub fn interior_margin(&self) -> Result<(f64, Vec<f64>, Vec<f64>), SpectraError> {
        let (m, p) = (self.m(), self.p());
        let mut prob = self.lmi_problem(Some(1.0));
        prob.sense = Sense::Maximize;
        prob.objective = LinearForm::new().free(m + p, 1.0);
        let sol = solve(&prob, &lmi_options())?;
        match sol.status {
            SolveStatus::Optimal => Ok((
                sol.x.free[m + p],
                sol.x.free[..m].to_vec(),
                sol.x.free[m..m + p].to_vec(),
            )),
            SolveStatus::PrimalInfeasible => Err(SpectraError::Empty),
            s => Err(SpectraError::Numerical(format!("interior margin: {s:?}"))),
        }
    }

    /// Decides `y in Omega`, returning a lifting witness `z`.
    pub fn contains(&self, y: &[f64]) -> Result<Membership, SpectraError> {
        if y.len() != self.m() {
            return Err(SpectraError::Invalid(format!(
                "point has {} coordinates, expected {}",
                y.len(),
                self.m()
            )));
        }
        if self.p() == 0 {
            let eig = self.pencil(y, &[]).min_eig();
            return Ok(if eig >= -MEMBERSHIP_TOL {
                Membership::Yes(Vec::new())
            } else {
                Membership::No
            });
        }
        // fix y by folding it into A0, then maximize the margin over z
        let fixed = Spectrahedron {
            a0: self.pencil(y, &[]),
            a: self.b.clone(),
            b: Vec::new(),
            vertices: None,
        };
        let (t, z, _) = fixed.interior_margin()?;
        let z_ok = fixed.pencil(&z, &[]).min_eig();
        Ok(if t >= -MEMBERSHIP_TOL && z_ok >= -MEMBERSHIP_TOL {
            Membership::Yes(z)
        } else {
            Membership::No
        })
    }

    /// Maximizes `c^T y` over the set.
    pub fn maximize_linear(&self, c: &[f64]) -> Result<LinearMax, SpectraError> {
        self.maximize_linear_with(c, &lmi_options())
    }

    pub fn maximize_linear_with(&self, c: &[f64], opts: &SolverOptions) -> Result<LinearMax, SpectraError> {
        let m = self.m();
        if c.len() != m {
            return Err(SpectraError::Invalid(format!(
                "objective has {} entries, expected {m}",
                c.len()
            )));
        }
        if m == 0 {
            return Ok(LinearMax {
                value: 0.0,
                y: Vec::new(),
                z: Vec::new(),
            });
        }
        let mut prob = self.lmi_problem(None);
        prob.sense = Sense::Maximize;
        let mut obj = LinearForm::new();
        for (j, &cj) in c.iter().enumerate() {
            obj.push_free(j, cj);
        }
        prob.objective = obj;
        let sol = solve(&prob, opts)?;
        match sol.status {
            SolveStatus::Optimal => Ok(LinearMax {
                value: sol.primal_value,
                y: sol.x.free[..m].to_vec(),
                z: sol.x.free[m..].to_vec(),
            }),
            SolveStatus::PrimalInfeasible => Err(SpectraError::Empty),
            SolveStatus::DualInfeasible => {
                let (lambda, v) = self.ray_parts(sol.certificate.as_ref());
                Err(SpectraError::Unbounded { lambda, v })
            }
            SolveStatus::NumericalFailure => Err(SpectraError::Numerical(format!(
                "maximize_linear stopped after {} iterations (gap {:e})",
                sol.iterations, sol.relative_gap
            ))),
        }
    }

    fn ray_parts(&self, cert: Option<&Certificate>) -> (Vec<f64>, Vec<f64>) {
        let m = self.m();
        match cert {
            Some(Certificate::ImprovingRay { ray }) => {
                (ray.free[..m].to_vec(), ray.free[m..].to_vec())
            }
            _ => (vec![0.0; m], vec![0.0; self.p()]),
        }
    }

    /// Maximizes and minimizes every coordinate (`2m` solves).
    pub fn assert_bounded(&self) -> Result<Boundedness, SpectraError> {
        let m = self.m();
        let mut ranges = Vec::with_capacity(m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            let mut pair = [0.0; 2];
            for (slot, sign) in [(1usize, 1.0), (0, -1.0)] {
                e[j] = sign;
                match self.maximize_linear(&e) {
                    Ok(r) => pair[slot] = sign * r.value,
                    Err(SpectraError::Unbounded { lambda, v }) => {
                        return Ok(Boundedness::UnboundedAlong { lambda, v })
                    }
                    Err(other) => return Err(other),
                }
            }
            ranges.push((pair[0], pair[1]));
        }
        Ok(Boundedness::Bounded(ranges))
    }

    /// The Cartesian product, as a block-diagonal LMI.
    pub fn product(&self, other: &Spectrahedron) -> Spectrahedron {
        let (t1, t2) = (self.t(), other.t());
        let z1 = SymMatrix::zeros(t1);
        let z2 = SymMatrix::zeros(t2);
        let a0 = SymMatrix::block_diag(&[&self.a0, &other.a0]);
        let a = self
            .a
            .iter()
            .map(|m| SymMatrix::block_diag(&[m, &z2]))
            .chain(other.a.iter().map(|m| SymMatrix::block_diag(&[&z1, m])))
            .collect();
        let b = self
            .b
            .iter()
            .map(|m| SymMatrix::block_diag(&[m, &z2]))
            .chain(other.b.iter().map(|m| SymMatrix::block_diag(&[&z1, m])))
            .collect();
        let vertices = match (&self.vertices, &other.vertices) {
            (Some(v1), Some(v2)) if v1.len() * v2.len() <= MAX_VERTICES => Some(
                v1.iter()
                    .flat_map(|p| {
                        v2.iter().map(move |q| p.iter().chain(q).copied().collect())
                    })
                    .collect(),
            ),
            _ => None,
        };
        Spectrahedron { a0, a, b, vertices }
    }

    /// The standard simplex `{y >= 0, sum y = 1}`; the equality is the pair of
    /// diagonal entries `1 - sum y >= 0` and `sum y - 1 >= 0`.
    pub fn simplex(m: usize) -> Result<Self, SpectraError> {
        if m == 0 {
            return Err(SpectraError::Invalid("simplex needs m >= 1".into()));
        }
        let t = m + 2;
        let mut a0 = vec![0.0; t];
        a0[m] = 1.0;
        a0[m + 1] = -1.0;
        let a = (0..m)
            .map(|j| {
                let mut d = vec![0.0; t];
                d[j] = 1.0;
                d[m] = -1.0;
                d[m + 1] = 1.0;
                SymMatrix::from_diagonal(&d)
            })
            .collect();
        let vertices = (0..m).map(|j| unit(m, j)).collect();
        Ok(Spectrahedron::unchecked(SymMatrix::from_diagonal(&a0), a, Vec::new())?.with_vertices(vertices))
    }

    /// `{y >= 0, sum y <= 1}`, which has nonempty interior.
    pub fn corner_simplex(m: usize) -> Result<Self, SpectraError> {
        if m == 0 {
            return Err(SpectraError::Invalid("simplex needs m >= 1".into()));
        }
        let mut a0 = vec![0.0; m + 1];
        a0[m] = 1.0;
        let a = (0..m)
            .map(|j| {
                let mut d = vec![0.0; m + 1];
                d[j] = 1.0;
                d[m] = -1.0;
                SymMatrix::from_diagonal(&d)
            })
            .collect();
        let mut vertices = vec![vec![0.0; m]];
        vertices.extend((0..m).map(|j| unit(m, j)));
        Ok(Spectrahedron::unchecked(SymMatrix::from_diagonal(&a0), a, Vec::new())?.with_vertices(vertices))
    }

    /// The closed unit Euclidean ball via the arrow LMI `[[I, y], [y^T, 1]] >= 0`.
    pub fn l2_ball(m: usize) -> Result<Self, SpectraError> {
        if m == 0 {
            return Err(SpectraError::Invalid("ball needs m >= 1".into()));
        }
        let a = (0..m)
            .map(|j| {
                let mut s = SymMatrix::zeros(m + 1);
                s.set(m, j, 1.0);
                s
            })
            .collect();
        Spectrahedron::unchecked(SymMatrix::identity(m + 1), a, Vec::new())
    }

    /// The box `lo <= y <= hi` as a diagonal LMI.
    pub fn box_set(lo: &[f64], hi: &[f64]) -> Result<Self, SpectraError> {
        let m = lo.len();
        if m == 0 || hi.len() != m {
            return Err(SpectraError::Invalid("box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(SpectraError::Invalid("box needs finite lo <= hi".into()));
        }
        let mut a0 = vec![0.0; 2 * m];
        for j in 0..m {
            a0[2 * j] = -lo[j];
            a0[2 * j + 1] = hi[j];
        }
        let a = (0..m)
            .map(|j| {
                let mut d = vec![0.0; 2 * m];
                d[2 * j] = 1.0;
                d[2 * j + 1] = -1.0;
                SymMatrix::from_diagonal(&d)
            })
            .collect();
        let s = Spectrahedron::unchecked(SymMatrix::from_diagonal(&a0), a, Vec::new())?;
        Ok(if m <= 12 {
            let vertices = (0..1usize << m)
                .map(|mask| {
                    (0..m)
                        .map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] })
                        .collect()
                })
                .collect();
            s.with_vertices(vertices)
        } else {
            s
        })
    }

    /// Trace-one PSD matrices of order `k`, vectorized by [`svec`]. The trace
    /// equality is the pair of diagonal entries `1 - Tr Y >= 0`, `Tr Y - 1 >= 0`.
    pub fn psd_trace_one(k: usize) -> Result<Self, SpectraError> {
        if k == 0 {
            return Err(SpectraError::Invalid("matrix order must be >= 1".into()));
        }
        let t = k + 2;
        let mut a0 = SymMatrix::zeros(t);
        a0.set(k, k, 1.0);
        a0.set(k + 1, k + 1, -1.0);
        let mut a = Vec::new();
        for i in 0..k {
            for j in 0..=i {
                let mut s = SymMatrix::zeros(t);
                if i == j {
                    s.set(i, i, 1.0);
                    s.set(k, k, -1.0);
                    s.set(k + 1, k + 1, 1.0);
                } else {
                    s.set(i, j, std::f64::consts::FRAC_1_SQRT_2);
                }
                a.push(s);
            }
        }
        Spectrahedron::unchecked(a0, a, Vec::new())
    }

    /// Trace-one PSD matrices with the last diagonal entry eliminated as
    /// `Y_kk = 1 - sum_{i<k} Y_ii`. Coordinates are [`svec`] without its last entry.
    pub fn psd_trace_one_reduced(k: usize) -> Result<Self, SpectraError> {
        if k < 2 {
            return Err(SpectraError::Invalid("reduced form needs order >= 2".into()));
        }
        let mut a0 = SymMatrix::zeros(k);
        a0.set(k - 1, k - 1, 1.0);
        let mut a = Vec::new();
        for i in 0..k {
            for j in 0..=i {
                if i == k - 1 && j == k - 1 {
                    continue;
                }
                let mut s = SymMatrix::zeros(k);
                if i == j {
                    s.set(i, i, 1.0);
                    s.set(k - 1, k - 1, -1.0);
                } else {
                    s.set(i, j, std::f64::consts::FRAC_1_SQRT_2);
                }
                a.push(s);
            }
        }
        Spectrahedron::unchecked(a0, a, Vec::new())
    }
}

fn unit(m: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[j] = 1.0;
    v
}

/// Position of `(i, j)`, `i >= j`, in the vectorization of a symmetric matrix.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

/// Lower triangle row by row, off-diagonal entries scaled by `sqrt 2`, so that
/// `svec(X) . svec(Y) = Tr(XY)`.
pub fn svec(x: &SymMatrix) -> Vec<f64> {
    let k = x.dim();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in 0..=i {
            out.push(if i == j {
                x.get(i, i)
            } else {
                std::f64::consts::SQRT_2 * x.get(i, j)
            });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Option<SymMatrix> {
    let mut k = 0;
    while k * (k + 1) / 2 < v.len() {
        k += 1;
    }
    if k * (k + 1) / 2 != v.len() {
        return None;
    }
    Some(SymMatrix::from_fn(k, |i, j| {
        let x = v[svec_index(i, j)];
        if i == j {
            x
        } else {
            x * std::f64::consts::FRAC_1_SQRT_2
        }
    }))
}
