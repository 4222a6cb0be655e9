//! Primal-dual path following on the standard form
//!
//! ```text
//! min  <C, X> + c_f . u
//! s.t. A(X) + F u = b,   X in K
//! ```
//!
//! where `K` is a product of PSD blocks and one nonnegative orthant and `u` is
//! free. The dual is `max b . y` subject to `C - A^T y = S in K`, `F^T y = c_f`.
//! Free variables stay in the Newton system through the augmented matrix
//! `[[M, F], [F^T, 0]]` instead of being split.

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};

use super::{
    Certificate, IneqSense, LinearForm, SdpPoint, SdpProblem, SdpSolution, Sense, SolveStatus,
    SolverOptions, SymMatrix,
};

/// Symmetric sparse matrix entries `(i, j, v)` with `i >= j`.
type SparseSym = Vec<(usize, usize, f64)>;

pub(crate) struct StandardForm {
    pub psd_dims: Vec<usize>,
    /// Nonnegative variables first, then one slack per inequality.
    pub n_lin: usize,
    pub n_user_nonneg: usize,
    pub n_free: usize,
    pub m: usize,
    pub b: Vec<f64>,
    /// For each PSD block, the rows touching it with their entries, sorted by row.
    pub psd_rows: Vec<Vec<(usize, SparseSym)>>,
    /// For each linear column, its `(row, coefficient)` entries.
    pub lin_cols: Vec<Vec<(usize, f64)>>,
    /// Dense `m x n_free` coupling of free variables.
    pub free_mat: DMatrix<f64>,
    pub c_psd: Vec<DMatrix<f64>>,
    pub c_lin: Vec<f64>,
    pub c_free: Vec<f64>,
    /// `+1` for minimization, `-1` when the user maximizes.
    pub sign: f64,
    pub offset: f64,
}

fn accumulate_form(
    form: &LinearForm,
    psd: &mut [std::collections::BTreeMap<(usize, usize), f64>],
    lin: &mut std::collections::BTreeMap<usize, f64>,
    free: &mut std::collections::BTreeMap<usize, f64>,
) {
    for &(b, i, j, c) in &form.psd {
        let v = if i == j { c } else { 0.5 * c };
        *psd[b].entry((i, j)).or_insert(0.0) += v;
    }
    for &(k, c) in &form.nonneg {
        *lin.entry(k).or_insert(0.0) += c;
    }
    for &(k, c) in &form.free {
        *free.entry(k).or_insert(0.0) += c;
    }
}

impl StandardForm {
    pub fn from_problem(p: &SdpProblem) -> Self {
        use std::collections::BTreeMap;

        let psd_dims = p.cone.psd_blocks.clone();
        let nb = psd_dims.len();
        let n_user_nonneg = p.cone.nonneg_count;
        let n_lin = n_user_nonneg + p.ineqs.len();
        let n_free = p.cone.free_count;
        let m = p.eqs.len() + p.ineqs.len();
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };

        let mut psd_rows: Vec<Vec<(usize, SparseSym)>> = vec![Vec::new(); nb];
        let mut lin_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_lin];
        let mut free_mat = DMatrix::zeros(m, n_free);
        let mut b = Vec::with_capacity(m);

        let rows = p
            .eqs
            .iter()
            .map(|c| (&c.form, c.rhs, None))
            .chain(p.ineqs.iter().map(|c| (&c.form, c.rhs, Some(c.sense))));
        for (k, (form, rhs, ineq)) in rows.enumerate() {
            let mut psd = vec![BTreeMap::new(); nb];
            let mut lin = BTreeMap::new();
            let mut free = BTreeMap::new();
            accumulate_form(form, &mut psd, &mut lin, &mut free);
            if let Some(sense) = ineq {
                let slack = n_user_nonneg + (k - p.eqs.len());
                let c = match sense {
                    IneqSense::Le => 1.0,
                    IneqSense::Ge => -1.0,
                };
                lin.insert(slack, c);
            }
            for (blk, entries) in psd.into_iter().enumerate() {
                let e: SparseSym = entries
                    .into_iter()
                    .filter(|(_, v)| *v != 0.0)
                    .map(|((i, j), v)| (i, j, v))
                    .collect();
                if !e.is_empty() {
                    psd_rows[blk].push((k, e));
                }
            }
            for (j, v) in lin {
                if v != 0.0 {
                    lin_cols[j].push((k, v));
                }
            }
            for (j, v) in free {
                free_mat[(k, j)] = v;
            }
            b.push(rhs);
        }

        let mut psd = vec![BTreeMap::new(); nb];
        let mut lin = BTreeMap::new();
        let mut free = BTreeMap::new();
        accumulate_form(&p.objective, &mut psd, &mut lin, &mut free);
        let c_psd = psd
            .into_iter()
            .zip(&psd_dims)
            .map(|(entries, &t)| {
                let mut c = DMatrix::zeros(t, t);
                for ((i, j), v) in entries {
                    c[(i, j)] = sign * v;
                    c[(j, i)] = sign * v;
                }
                c
            })
            .collect();
        let mut c_lin = vec![0.0; n_lin];
        for (j, v) in lin {
            c_lin[j] = sign * v;
        }
        let mut c_free = vec![0.0; n_free];
        for (j, v) in free {
            c_free[j] = sign * v;
        }

        StandardForm {
            psd_dims,
            n_lin,
            n_user_nonneg,
            n_free,
            m,
            b,
            psd_rows,
            lin_cols,
            free_mat,
            c_psd,
            c_lin,
            c_free,
            sign,
            offset: p.offset,
        }
    }

    fn barrier_degree(&self) -> f64 {
        (self.psd_dims.iter().sum::<usize>() + self.n_lin) as f64
    }

    /// `A(X) + a_lin . x` (free part excluded).
    fn apply_a(&self, x_psd: &[DMatrix<f64>], x_lin: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, rows) in self.psd_rows.iter().enumerate() {
            let x = &x_psd[blk];
            for (k, entries) in rows {
                out[*k] += sym_dot(entries, x);
            }
        }
        for (j, col) in self.lin_cols.iter().enumerate() {
            for &(k, v) in col {
                out[k] += v * x_lin[j];
            }
        }
        out
    }

    /// `A^T y` split by cone part, plus `F^T y`.
    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>, DVector<f64>) {
        let psd = self
            .psd_rows
            .iter()
            .zip(&self.psd_dims)
            .map(|(rows, &t)| {
                let mut m = DMatrix::zeros(t, t);
                for (k, entries) in rows {
                    let yk = y[*k];
                    for &(i, j, v) in entries {
                        m[(i, j)] += yk * v;
                        if i != j {
                            m[(j, i)] += yk * v;
                        }
                    }
                }
                m
            })
            .collect();
        let lin = self
            .lin_cols
            .iter()
            .map(|col| col.iter().map(|&(k, v)| v * y[k]).sum())
            .collect();
        let free = self.free_mat.transpose() * y;
        (psd, lin, free)
    }
}

// Tr(A X) for A given by its lower entries
fn sym_dot(entries: &SparseSym, x: &DMatrix<f64>) -> f64 {
    entries
        .iter()
        .map(|&(i, j, v)| {
            if i == j {
                v * x[(i, i)]
            } else {
                2.0 * v * x[(i, j)]
            }
        })
        .sum()
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.nrows();
    for i in 0..t {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[derive(Clone)]
struct Iterate {
    x_psd: Vec<DMatrix<f64>>,
    x_lin: Vec<f64>,
    u: DVector<f64>,
    y: DVector<f64>,
    s_psd: Vec<DMatrix<f64>>,
    s_lin: Vec<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd_psd: Vec<DMatrix<f64>>,
    rd_lin: Vec<f64>,
    rf: DVector<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    relgap: f64,
    compl: f64,
}

struct BlockScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
}

struct Direction {
    dx_psd: Vec<DMatrix<f64>>,
    dx_lin: Vec<f64>,
    du: DVector<f64>,
    dy: DVector<f64>,
    ds_psd: Vec<DMatrix<f64>>,
    ds_lin: Vec<f64>,
}

pub(crate) struct RawResult {
    status: SolveStatus,
    it: Iterate,
    iterations: usize,
    res_pinf: f64,
    res_dinf: f64,
    relgap: f64,
    pobj: f64,
    dobj: f64,
    cert: Option<RawCert>,
}

enum RawCert {
    Farkas(DVector<f64>),
    Ray {
        x_psd: Vec<DMatrix<f64>>,
        x_lin: Vec<f64>,
        u: DVector<f64>,
    },
}

fn norm_all(mats: &[DMatrix<f64>], v1: &[f64], v2: &DVector<f64>) -> f64 {
    (mats.iter().map(|m| m.norm_squared()).sum::<f64>()
        + v1.iter().map(|x| x * x).sum::<f64>()
        + v2.norm_squared())
    .sqrt()
}

impl StandardForm {
    fn initial_point(&self) -> Iterate {
        let mut x_psd = Vec::new();
        let mut s_psd = Vec::new();
        for (blk, &t) in self.psd_dims.iter().enumerate() {
            let tf = t as f64;
            let mut xi: f64 = 10f64.max(tf.sqrt());
            let mut eta: f64 = 10f64.max(tf.sqrt()).max(self.c_psd[blk].norm());
            for (k, entries) in &self.psd_rows[blk] {
                let na = sparse_norm(entries);
                xi = xi.max(tf * (1.0 + self.b[*k].abs()) / (1.0 + na));
                eta = eta.max(na);
            }
            x_psd.push(DMatrix::identity(t, t) * xi);
            s_psd.push(DMatrix::identity(t, t) * eta);
        }
        let nl = self.n_lin as f64;
        let mut xi: f64 = 10f64.max(nl.sqrt());
        let mut eta: f64 = 10f64.max(nl.sqrt());
        for (j, col) in self.lin_cols.iter().enumerate() {
            eta = eta.max(self.c_lin[j].abs());
            for &(k, v) in col {
                xi = xi.max((1.0 + self.b[k].abs()) / (1.0 + v.abs()));
                eta = eta.max(v.abs());
            }
        }
        Iterate {
            x_psd,
            x_lin: vec![xi; self.n_lin],
            u: DVector::zeros(self.n_free),
            y: DVector::zeros(self.m),
            s_psd,
            s_lin: vec![eta; self.n_lin],
        }
    }

    fn c_norm(&self) -> f64 {
        norm_all(&self.c_psd, &self.c_lin, &DVector::from_column_slice(&self.c_free))
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let ax = self.apply_a(&it.x_psd, &it.x_lin) + &self.free_mat * &it.u;
        let b = DVector::from_column_slice(&self.b);
        let rp = &b - ax;
        let (aty_psd, aty_lin, fty) = self.apply_at(&it.y);
        let rd_psd: Vec<DMatrix<f64>> = (0..self.psd_dims.len())
            .map(|k| &self.c_psd[k] - &aty_psd[k] - &it.s_psd[k])
            .collect();
        let rd_lin: Vec<f64> = (0..self.n_lin)
            .map(|j| self.c_lin[j] - aty_lin[j] - it.s_lin[j])
            .collect();
        let rf = DVector::from_column_slice(&self.c_free) - fty;

        let pobj = self
            .c_psd
            .iter()
            .zip(&it.x_psd)
            .map(|(c, x)| frob_dot(c, x))
            .sum::<f64>()
            + dot(&self.c_lin, &it.x_lin)
            + dot(&self.c_free, it.u.as_slice());
        let dobj = b.dot(&it.y);
        let xs = it
            .x_psd
            .iter()
            .zip(&it.s_psd)
            .map(|(x, s)| frob_dot(x, s))
            .sum::<f64>()
            + dot(&it.x_lin, &it.s_lin);
        let scale = 1.0 + pobj.abs() + dobj.abs();
        Residuals {
            pinf: rp.norm() / (1.0 + b.norm()),
            dinf: norm_all(&rd_psd, &rd_lin, &rf) / (1.0 + self.c_norm()),
            relgap: (pobj - dobj).abs() / scale,
            compl: xs.max(0.0) / scale,
            rp,
            rd_psd,
            rd_lin,
            rf,
            pobj,
            dobj,
        }
    }
}

fn farkas_measure(sf: &StandardForm, it: &Iterate) -> f64 {
    let (aty_psd, aty_lin, fty) = sf.apply_at(&it.y);
    let rsum: Vec<DMatrix<f64>> = aty_psd
        .iter()
        .zip(&it.s_psd)
        .map(|(a, s)| a + s)
        .collect();
    let rlin: Vec<f64> = aty_lin.iter().zip(&it.s_lin).map(|(a, s)| a + s).collect();
    norm_all(&rsum, &rlin, &fty)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sparse_norm(e: &SparseSym) -> f64 {
    e.iter()
        .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
        .sum::<f64>()
        .sqrt()
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let svd = (ls.transpose() * &lx).svd(true, true);
    let u_t = svd.v_t?;
    let sv = svd.singular_values;
    if sv.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let v = u_t.transpose();
    let t = x.nrows();
    let inv_sqrt = DMatrix::from_diagonal(&sv.map(|v| 1.0 / v.sqrt()));
    let sqrt = DMatrix::from_diagonal(&sv.map(f64::sqrt));
    let g = &lx * &v * inv_sqrt;
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(t, t))?;
    let g_inv = sqrt * v.transpose() * lx_inv;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(BlockScaling {
        g,
        g_inv,
        w,
        lambda: sv,
    })
}

/// Largest `a` with `X + a dX` PSD (infinite when `dX` is PSD).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let t = x.nrows();
    let min_eig = match x.clone().cholesky() {
        Some(ch) => {
            let l = ch.l();
            let Some(li) = l.solve_lower_triangular(&DMatrix::identity(t, t)) else {
                return 0.0;
            };
            let mut m = &li * dx * li.transpose();
            symmetrize(&mut m);
            SymmetricEigen::new(m).eigenvalues.min()
        }
        None => return 0.0,
    };
    if min_eig >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min_eig
    }
}

fn max_step_lin(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Newton {
    scalings: Vec<BlockScaling>,
    w_lin: Vec<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k_exact: DMatrix<f64>,
}

impl StandardForm {
    fn schur(&self, scalings: &[BlockScaling], w_lin: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.m, self.m);
        for (blk, rows) in self.psd_rows.iter().enumerate() {
            let w = &scalings[blk].w;
            let t = w.nrows();
            for (pos, (k, ek)) in rows.iter().enumerate() {
                // V = W A_k W
                let v = if ek.len() < t {
                    let mut v = DMatrix::zeros(t, t);
                    for &(i, j, a) in ek {
                        let wi = w.column(i);
                        let wj = w.column(j);
                        if i == j {
                            v.ger(a, &wi, &wi, 1.0);
                        } else {
                            v.ger(a, &wi, &wj, 1.0);
                            v.ger(a, &wj, &wi, 1.0);
                        }
                    }
                    v
                } else {
                    let mut a = DMatrix::zeros(t, t);
                    for &(i, j, val) in ek {
                        a[(i, j)] = val;
                        a[(j, i)] = val;
                    }
                    w * a * w
                };
                for (l, el) in &rows[pos..] {
                    let val = sym_dot(el, &v);
                    m[(*k, *l)] += val;
                    if k != l {
                        m[(*l, *k)] += val;
                    }
                }
            }
        }
        for (j, col) in self.lin_cols.iter().enumerate() {
            let wj = w_lin[j];
            for &(k, a) in col {
                for &(l, c) in col {
                    m[(k, l)] += wj * a * c;
                }
            }
        }
        m
    }

    fn factor(&self, it: &Iterate) -> Option<Newton> {
        let mut scalings = Vec::with_capacity(self.psd_dims.len());
        for (x, s) in it.x_psd.iter().zip(&it.s_psd) {
            scalings.push(nt_scaling(x, s)?);
        }
        let w_lin: Vec<f64> = it.x_lin.iter().zip(&it.s_lin).map(|(x, s)| x / s).collect();
        let m = self.schur(&scalings, &w_lin);
        let n = self.m + self.n_free;
        let mut k = DMatrix::zeros(n, n);
        k.view_mut((0, 0), (self.m, self.m)).copy_from(&m);
        k.view_mut((0, self.m), (self.m, self.n_free))
            .copy_from(&self.free_mat);
        k.view_mut((self.m, 0), (self.n_free, self.m))
            .copy_from(&self.free_mat.transpose());
        let diag_max = (0..self.m).map(|i| m[(i, i)].abs()).fold(1.0, f64::max);
        let mut kr = k.clone();
        for i in 0..self.m {
            kr[(i, i)] += 1e-14 * diag_max;
        }
        for i in self.m..n {
            kr[(i, i)] -= 1e-12;
        }
        Some(Newton {
            scalings,
            w_lin,
            lu: kr.lu(),
            k_exact: k,
        })
    }

    fn solve_kkt(&self, nt: &Newton, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        if rhs.is_empty() {
            return Some(DVector::zeros(0));
        }
        let mut sol = nt.lu.solve(rhs)?;
        for _ in 0..2 {
            let r = rhs - &nt.k_exact * &sol;
            let corr = nt.lu.solve(&r)?;
            sol += corr;
        }
        if sol.iter().all(|v| v.is_finite()) {
            Some(sol)
        } else {
            None
        }
    }

    /// Solves the Newton system for `dX + W dS W = rx` (per block) and the
    /// primal/dual residual equations.
    fn direction(
        &self,
        nt: &Newton,
        res: &Residuals,
        rx_psd: &[DMatrix<f64>],
        rx_lin: &[f64],
    ) -> Option<Direction> {
        let tmp_psd: Vec<DMatrix<f64>> = (0..self.psd_dims.len())
            .map(|k| {
                let w = &nt.scalings[k].w;
                &rx_psd[k] - w * &res.rd_psd[k] * w
            })
            .collect();
        let tmp_lin: Vec<f64> = (0..self.n_lin)
            .map(|j| rx_lin[j] - nt.w_lin[j] * res.rd_lin[j])
            .collect();
        let rhs1 = &res.rp - self.apply_a(&tmp_psd, &tmp_lin);
        let mut rhs = DVector::zeros(self.m + self.n_free);
        rhs.rows_mut(0, self.m).copy_from(&rhs1);
        rhs.rows_mut(self.m, self.n_free).copy_from(&res.rf);
        let sol = self.solve_kkt(nt, &rhs)?;
        let dy = sol.rows(0, self.m).into_owned();
        let du = sol.rows(self.m, self.n_free).into_owned();
        let (aty_psd, aty_lin, _) = self.apply_at(&dy);
        let mut ds_psd = Vec::with_capacity(self.psd_dims.len());
        let mut dx_psd = Vec::with_capacity(self.psd_dims.len());
        for k in 0..self.psd_dims.len() {
            let mut ds = &res.rd_psd[k] - &aty_psd[k];
            symmetrize(&mut ds);
            let w = &nt.scalings[k].w;
            let mut dx = &rx_psd[k] - w * &ds * w;
            symmetrize(&mut dx);
            ds_psd.push(ds);
            dx_psd.push(dx);
        }
        let ds_lin: Vec<f64> = (0..self.n_lin).map(|j| res.rd_lin[j] - aty_lin[j]).collect();
        let dx_lin: Vec<f64> = (0..self.n_lin)
            .map(|j| rx_lin[j] - nt.w_lin[j] * ds_lin[j])
            .collect();
        Some(Direction {
            dx_psd,
            dx_lin,
            du,
            dy,
            ds_psd,
            ds_lin,
        })
    }

    fn step_lengths(&self, it: &Iterate, d: &Direction) -> (f64, f64) {
        let mut ap = max_step_lin(&it.x_lin, &d.dx_lin);
        let mut ad = max_step_lin(&it.s_lin, &d.ds_lin);
        for k in 0..self.psd_dims.len() {
            ap = ap.min(max_step_psd(&it.x_psd[k], &d.dx_psd[k]));
            ad = ad.min(max_step_psd(&it.s_psd[k], &d.ds_psd[k]));
        }
        (ap, ad)
    }
}

fn apply_step(it: &Iterate, d: &Direction, ap: f64, ad: f64) -> Iterate {
    Iterate {
        x_psd: it
            .x_psd
            .iter()
            .zip(&d.dx_psd)
            .map(|(x, dx)| x + dx * ap)
            .collect(),
        x_lin: it
            .x_lin
            .iter()
            .zip(&d.dx_lin)
            .map(|(x, dx)| x + ap * dx)
            .collect(),
        u: &it.u + &d.du * ap,
        y: &it.y + &d.dy * ad,
        s_psd: it
            .s_psd
            .iter()
            .zip(&d.ds_psd)
            .map(|(s, ds)| s + ds * ad)
            .collect(),
        s_lin: it
            .s_lin
            .iter()
            .zip(&d.ds_lin)
            .map(|(s, ds)| s + ad * ds)
            .collect(),
    }
}

fn complementarity(it: &Iterate) -> f64 {
    it.x_psd
        .iter()
        .zip(&it.s_psd)
        .map(|(x, s)| frob_dot(x, s))
        .sum::<f64>()
        + dot(&it.x_lin, &it.s_lin)
}

const STALL_WINDOW: usize = 25;

pub(crate) fn run(sf: &StandardForm, opts: &SolverOptions) -> RawResult {
    let nu = sf.barrier_degree().max(1.0);
    let mut it = sf.initial_point();
    let mut pinf_streak = 0;
    let mut dinf_streak = 0;
    let mut best: Option<(f64, Iterate, usize)> = None;

    for iter in 0..=opts.max_iter {
        let res = sf.residuals(&it);
        let done = |r: &Residuals| {
            r.pinf <= opts.feas_tol && r.dinf <= opts.feas_tol && r.relgap.max(r.compl) <= opts.gap_tol
        };
        if done(&res) {
            return finish(SolveStatus::Optimal, it, iter, &res, None);
        }
        let merit = res.pinf.max(res.dinf).max(res.relgap.max(res.compl));
        if merit.is_finite() && best.as_ref().map_or(true, |(m, _, _)| merit < *m) {
            best = Some((merit, it.clone(), iter));
        }

        // Farkas ray: b.y > 0 with A^T y + S ~ 0 and F^T y ~ 0.
        pinf_streak = if res.dobj > 0.0 && farkas_measure(sf, &it) / res.dobj < opts.infeas_tol {
            pinf_streak + 1
        } else {
            0
        };
        // improving ray: c.x < 0 with A x + F u ~ 0
        dinf_streak = if res.pobj < 0.0 {
            let ax = sf.apply_a(&it.x_psd, &it.x_lin) + &sf.free_mat * &it.u;
            if ax.norm() / (-res.pobj) < opts.infeas_tol {
                dinf_streak + 1
            } else {
                0
            }
        } else {
            0
        };
        if pinf_streak >= opts.infeas_patience {
            let y = &it.y / res.dobj;
            return finish(
                SolveStatus::PrimalInfeasible,
                it,
                iter,
                &res,
                Some(RawCert::Farkas(y)),
            );
        }
        if dinf_streak >= opts.infeas_patience {
            let scale = -1.0 / res.pobj;
            let cert = RawCert::Ray {
                x_psd: it.x_psd.iter().map(|x| x * scale).collect(),
                x_lin: it.x_lin.iter().map(|x| x * scale).collect(),
                u: &it.u * scale,
            };
            return finish(SolveStatus::DualInfeasible, it, iter, &res, Some(cert));
        }
        if iter == opts.max_iter {
            break;
        }
        // no progress on the merit for a long stretch: the best iterate is final
        if best.as_ref().is_some_and(|(_, _, k)| iter >= k + STALL_WINDOW) {
            break;
        }

        let Some(nt) = sf.factor(&it) else { break };
        let mu = complementarity(&it) / nu;

        // predictor
        let rx_psd: Vec<DMatrix<f64>> = it.x_psd.iter().map(|x| -x).collect();
        let rx_lin: Vec<f64> = it.x_lin.iter().map(|x| -x).collect();
        let Some(aff) = sf.direction(&nt, &res, &rx_psd, &rx_lin) else {
            break;
        };
        let (ap, ad) = sf.step_lengths(&it, &aff);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let trial = apply_step(&it, &aff, ap, ad);
        let mu_aff = complementarity(&trial) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let mut rc_psd = Vec::with_capacity(sf.psd_dims.len());
        for (k, sc) in nt.scalings.iter().enumerate() {
            let dxt = &sc.g_inv * &aff.dx_psd[k] * sc.g_inv.transpose();
            let dst = sc.g.transpose() * &aff.ds_psd[k] * &sc.g;
            let prod = &dxt * &dst;
            let t = sc.lambda.len();
            let mut rt = DMatrix::zeros(t, t);
            for i in 0..t {
                for j in 0..t {
                    let h = 0.5 * (prod[(i, j)] + prod[(j, i)]);
                    let mut rc = -h;
                    if i == j {
                        rc += sigma * mu - sc.lambda[i] * sc.lambda[i];
                    }
                    rt[(i, j)] = 2.0 * rc / (sc.lambda[i] + sc.lambda[j]);
                }
            }
            let mut rx = &sc.g * rt * sc.g.transpose();
            symmetrize(&mut rx);
            rc_psd.push(rx);
        }
        let rc_lin: Vec<f64> = (0..sf.n_lin)
            .map(|j| {
                (sigma * mu - it.x_lin[j] * it.s_lin[j] - aff.dx_lin[j] * aff.ds_lin[j])
                    / it.s_lin[j]
            })
            .collect();
        let Some(dir) = sf.direction(&nt, &res, &rc_psd, &rc_lin) else {
            break;
        };
        let (ap, ad) = sf.step_lengths(&it, &dir);
        let tau = opts.step_fraction;
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if !(ap > 1e-14 || ad > 1e-14) {
            break;
        }
        it = apply_step(&it, &dir, ap, ad);
    }

    let (_, it, iter) = best.unwrap_or_else(|| (f64::INFINITY, sf.initial_point(), 0));
    let res = sf.residuals(&it);
    finish(SolveStatus::NumericalFailure, it, iter.max(1), &res, None)
}

fn finish(
    status: SolveStatus,
    it: Iterate,
    iterations: usize,
    res: &Residuals,
    cert: Option<RawCert>,
) -> RawResult {
    RawResult {
        status,
        iterations,
        res_pinf: res.pinf,
        res_dinf: res.dinf,
        relgap: res.relgap.max(res.compl),
        pobj: res.pobj,
        dobj: res.dobj,
        it,
        cert,
    }
}

fn to_sym(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_dense(m)
}

impl StandardForm {
    pub fn to_solution(&self, raw: RawResult) -> SdpSolution {
        let it = &raw.it;
        let x = SdpPoint {
            psd: it.x_psd.iter().map(to_sym).collect(),
            nonneg: it.x_lin[..self.n_user_nonneg].to_vec(),
            free: it.u.iter().copied().collect(),
        };
        let dual_slack = SdpPoint {
            psd: it.s_psd.iter().map(to_sym).collect(),
            nonneg: it.s_lin[..self.n_user_nonneg].to_vec(),
            free: vec![0.0; self.n_free],
        };
        let multipliers = it.y.iter().map(|v| self.sign * v).collect();
        let certificate = raw.cert.map(|c| match c {
            RawCert::Farkas(y) => Certificate::Infeasibility {
                multipliers: y.iter().copied().collect(),
            },
            RawCert::Ray { x_psd, x_lin, u } => Certificate::ImprovingRay {
                ray: SdpPoint {
                    psd: x_psd.iter().map(to_sym).collect(),
                    nonneg: x_lin[..self.n_user_nonneg].to_vec(),
                    free: u.iter().copied().collect(),
                },
            },
        });
        SdpSolution {
            status: raw.status,
            primal_value: self.sign * raw.pobj + self.offset,
            dual_value: self.sign * raw.dobj + self.offset,
            x,
            dual_slack,
            multipliers,
            iterations: raw.iterations,
            primal_residual: raw.res_pinf,
            dual_residual: raw.res_dinf,
            relative_gap: raw.relgap,
            certificate,
        }
    }
}
