//! Random program families with closed-form evaluators used as oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosrelax::spectra::Spectrahedron;
use sosrelax::ssafunc::{SsaFunction, SsaProgram};
use sosrelax::{ConeSpec, LinearForm, Polynomial, SdpProblem};

pub type Eval = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub struct Case {
    pub label: String,
    pub prog: SsaProgram,
    pub objective: Eval,
    pub constraints: Vec<Eval>,
}

impl Case {
    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|g| g(x) <= tol)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn var(n: usize, k: usize) -> Polynomial {
    Polynomial::variable(n, k).unwrap()
}

fn affine(n: usize, g: &[f64], c: f64) -> Polynomial {
    let mut p = Polynomial::constant(n, c).unwrap();
    for (k, &gk) in g.iter().enumerate() {
        p = p.axpy(gk, &var(n, k)).unwrap();
    }
    p
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unif(r: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-s..s)).collect()
}

/// `(x - c)^T L L^T (x - c) + eps |x - c|^2 + w x_1^4`.
fn objective_poly(r: &mut ChaCha8Rng, n: usize) -> (Polynomial, Eval) {
    let l: Vec<Vec<f64>> = (0..n).map(|_| unif(r, n, 1.0)).collect();
    let c = unif(r, n, 1.5);
    let w = if r.gen_bool(0.5) { r.gen_range(0.1..1.0) } else { 0.0 };
    let eps = 0.2;
    let mut p = Polynomial::zero(n).unwrap();
    for row in &l {
        let lin = affine(n, row, -dot(row, &c));
        p = p.add(&lin.square().unwrap()).unwrap();
    }
    for k in 0..n {
        p = p.axpy(eps, &affine(n, &unit(n, k), -c[k]).square().unwrap()).unwrap();
    }
    p = p.axpy(w, &var(n, 0).pow(4).unwrap()).unwrap();
    let f = move |x: &[f64]| {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        l.iter().map(|row| dot(row, &d).powi(2)).sum::<f64>()
            + eps * dot(&d, &d)
            + w * x[0].powi(4)
    };
    (p, Box::new(f))
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// `||x - a||_2 - rad`.
pub fn shifted_norm(n: usize, a: &[f64], rad: f64) -> (SsaFunction, Eval) {
    let mut h = vec![Polynomial::constant(n, -rad).unwrap()];
    for k in 0..n {
        h.push(affine(n, &unit(n, k), -a[k]));
    }
    let f = SsaFunction::new(h, Spectrahedron::l2_ball(n).unwrap()).unwrap();
    let a = a.to_vec();
    let e = move |x: &[f64]| {
        x.iter().zip(&a).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() - rad
    };
    (f, Box::new(e))
}

fn constraint(r: &mut ChaCha8Rng, n: usize, kind: usize) -> (SsaFunction, Eval) {
    match kind {
        0 => {
            let rad = r.gen_range(0.5..1.5);
            let a = unif(r, n, 0.5 * rad / (n as f64).sqrt());
            let mut p = Polynomial::constant(n, -rad * rad).unwrap();
            for k in 0..n {
                p = p.add(&affine(n, &unit(n, k), -a[k]).square().unwrap()).unwrap();
            }
            let e = move |x: &[f64]| {
                x.iter().zip(&a).map(|(p, q)| (p - q).powi(2)).sum::<f64>() - rad * rad
            };
            (SsaFunction::polynomial(p).unwrap(), Box::new(e))
        }
        1 => {
            let rad = r.gen_range(0.5..1.5);
            let a = unif(r, n, 0.5 * rad / (n as f64).sqrt());
            shifted_norm(n, &a, rad)
        }
        2 => {
            let k = r.gen_range(2..=4);
            let gs: Vec<Vec<f64>> = (0..k).map(|_| unif(r, n, 1.5)).collect();
            let polys: Vec<Polynomial> = gs.iter().map(|g| affine(n, g, -1.0)).collect();
            let f = SsaFunction::from_max_of_polys(&polys).unwrap();
            let e = move |x: &[f64]| {
                gs.iter().map(|g| dot(g, x) - 1.0).fold(f64::NEG_INFINITY, f64::max)
            };
            (f, Box::new(e))
        }
        3 => {
            let rad = r.gen_range(0.5..1.5);
            let f = SsaFunction::l1_norm(n)
                .unwrap()
                .add(&SsaFunction::polynomial(Polynomial::constant(n, -rad).unwrap()).unwrap())
                .unwrap();
            let e = move |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>() - rad;
            (f, Box::new(e))
        }
        _ => {
            let rad = r.gen_range(0.5..1.5);
            let mut p = Polynomial::constant(n, -rad).unwrap();
            for k in 0..n {
                p = p.add(&var(n, k).pow(4).unwrap()).unwrap();
            }
            p = p.add(&var(n, 0).square().unwrap()).unwrap();
            let e = move |x: &[f64]| {
                x.iter().map(|v| v.powi(4)).sum::<f64>() + x[0] * x[0] - rad
            };
            (SsaFunction::polynomial(p).unwrap(), Box::new(e))
        }
    }
}

/// A strictly feasible program (the origin is a Slater point) in `n` variables.
pub fn random_case(seed: u64, n: usize) -> Case {
    random_case_with(seed, n, false)
}

/// Like [`random_case`]; with `bounded` the first constraint has a compact
/// sublevel set inside the ball of radius 2.
pub fn random_case_with(seed: u64, n: usize, bounded: bool) -> Case {
    let mut r = rng(seed);
    let (p0, e0) = objective_poly(&mut r, n);
    let (objective, e0): (SsaFunction, Eval) = if r.gen_bool(0.3) {
        let a = unif(&mut r, n, 1.0);
        let (nf, ne) = shifted_norm(n, &a, 0.0);
        let f = SsaFunction::polynomial(p0).unwrap().add(&nf).unwrap();
        (f, Box::new(move |x: &[f64]| e0(x) + ne(x)))
    } else {
        (SsaFunction::polynomial(p0).unwrap(), e0)
    };
    let count = r.gen_range(1..=2);
    let mut fs = Vec::new();
    let mut es = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..count {
        let kind = if bounded && i == 0 {
            [0, 1, 3, 4][r.gen_range(0..4)]
        } else {
            r.gen_range(0..5)
        };
        let (f, e) = constraint(&mut r, n, kind);
        kinds.push(kind);
        fs.push(f);
        es.push(e);
    }
    Case {
        label: format!("seed {seed} n {n} kinds {kinds:?}"),
        prog: SsaProgram::new(objective, fs).unwrap(),
        objective: e0,
        constraints: es,
    }
}

/// Vertices of `{u in R^2 : C u <= d}` by intersecting pairs of facets.
pub fn polygon_vertices(c: &[Vec<f64>], d: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let det = c[i][0] * c[j][1] - c[i][1] * c[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let u = vec![
                (d[i] * c[j][1] - c[i][1] * d[j]) / det,
                (c[i][0] * d[j] - d[i] * c[j][0]) / det,
            ];
            let inside = c.iter().zip(d).all(|(r, &di)| dot(r, &u) <= di + 1e-9);
            if inside && !out.iter().any(|v| (v[0] - u[0]).abs() + (v[1] - u[1]).abs() < 1e-9) {
                out.push(u);
            }
        }
    }
    out
}

pub struct RobustCase {
    pub rp: sosrelax::robust::RobustProgram,
    /// Vertices of each constraint's uncertainty polygon.
    pub vertices: Vec<Vec<Vec<f64>>>,
}

impl RobustCase {
    /// The scenario program with one polynomial constraint per vertex.
    pub fn scenario_program(&self) -> SsaProgram {
        let mut cons = Vec::new();
        for (c, vs) in self.rp.constraints().iter().zip(&self.vertices) {
            for v in vs {
                let mut p = c.g()[0].clone();
                for (gj, &uj) in c.g()[1..].iter().zip(v) {
                    p = p.axpy(uj, gj).unwrap();
                }
                cons.push(SsaFunction::polynomial(p).unwrap());
            }
        }
        SsaProgram::new(
            SsaFunction::polynomial(self.rp.objective().clone()).unwrap(),
            cons,
        )
        .unwrap()
    }
}

/// `g = a |x|^2 - 1 + u1 x1^2 + u2 (b . x)` with `u1 >= 0` over a random polygon
/// inside `[0, 1] x [-1, 1]`.
pub fn random_robust(seed: u64) -> RobustCase {
    use sosrelax::robust::{RobustProgram, UncertainConstraint};
    let mut r = rng(seed ^ 0xabcd);
    let n = 2;
    let (obj, _) = objective_poly(&mut r, n);
    let count = r.gen_range(1..=2);
    let mut cons = Vec::new();
    let mut vertices = Vec::new();
    for _ in 0..count {
        let a = r.gen_range(0.5..1.5);
        let b = unif(&mut r, n, 1.0);
        let mut g0 = Polynomial::constant(n, -1.0).unwrap();
        for k in 0..n {
            g0 = g0.axpy(a, &var(n, k).square().unwrap()).unwrap();
        }
        let g = vec![g0, var(n, 0).square().unwrap(), affine(n, &b, 0.0)];
        let mut c = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let mut d = vec![1.0, 1.0, 1.0];
        // a random cut through the box that keeps a neighbourhood of (0.5, 0)
        let dir = unif(&mut r, 2, 1.0);
        c.push(dir.clone());
        d.push(dot(&dir, &[0.5, 0.0]) + r.gen_range(0.2..0.6));
        vertices.push(polygon_vertices(
            &[c.clone(), vec![vec![-1.0, 0.0]]].concat(),
            &[d.clone(), vec![0.0]].concat(),
        ));
        cons.push(UncertainConstraint::polytope(g, 1, &c, &d).unwrap());
    }
    RobustCase {
        rp: RobustProgram::new(obj, cons).unwrap(),
        vertices,
    }
}

/// min x1^4 - x2 subject to x1^2 + x2^2 + 2||x|| - 1 <= 0, with the norm
/// written as a supremum over the unit ball.
pub fn ep() -> SsaProgram {
    let f0 = var(2, 0).pow(4).unwrap().sub(&var(2, 1)).unwrap();
    let h0 = var(2, 0)
        .square()
        .unwrap()
        .add(&var(2, 1).square().unwrap())
        .unwrap()
        .add_constant(-1.0);
    let f1 = SsaFunction::new(
        vec![h0, var(2, 0).scale(2.0), var(2, 1).scale(2.0)],
        Spectrahedron::l2_ball(2).unwrap(),
    )
    .unwrap();
    SsaProgram::new(SsaFunction::polynomial(f0).unwrap(), vec![f1]).unwrap()
}

/// `min c.y` over `A0 + y1 A1 + y2 A2 >= 0` (3x3) and `|y_i| <= 2`.
pub struct Lmi2 {
    pub a0: [[f64; 3]; 3],
    pub a: [[[f64; 3]; 3]; 2],
    pub c: [f64; 2],
}

fn sym3(r: &mut ChaCha8Rng, s: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let v = r.gen_range(-s..s);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

pub fn random_lmi(seed: u64) -> Lmi2 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut a0 = sym3(&mut r, 0.3);
    for (i, row) in a0.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let a = [sym3(&mut r, 1.0), sym3(&mut r, 1.0)];
    let c = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
    Lmi2 { a0, a, c }
}

impl Lmi2 {
    pub fn problem(&self, scale: f64) -> SdpProblem {
        let mut p = SdpProblem::minimize(ConeSpec::new(vec![3], 0, 2))
            .with_objective(LinearForm::new().free(0, scale * self.c[0]).free(1, scale * self.c[1]));
        for i in 0..3 {
            for j in 0..=i {
                let f = LinearForm::new()
                    .psd(0, i, j, 1.0)
                    .free(0, -self.a[0][i][j])
                    .free(1, -self.a[1][i][j]);
                p.add_eq(f, self.a0[i][j]);
            }
        }
        for k in 0..2 {
            p.add_le(LinearForm::new().free(k, 1.0), 2.0);
            p.add_ge(LinearForm::new().free(k, 1.0), -2.0);
        }
        p
    }

    pub fn pencil(&self, y: [f64; 2]) -> [[f64; 3]; 3] {
        let mut m = self.a0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += y[0] * self.a[0][i][j] + y[1] * self.a[1][i][j];
            }
        }
        m
    }

    /// PSD test by principal minors.
    pub fn feasible(&self, y: [f64; 2]) -> bool {
        let m = self.pencil(y);
        let d2 = |i: usize, j: usize| m[i][i] * m[j][j] - m[i][j] * m[j][i];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        (0..3).all(|i| m[i][i] >= 0.0) && d2(0, 1) >= 0.0 && d2(0, 2) >= 0.0 && d2(1, 2) >= 0.0 && det >= 0.0
    }

    /// The feasible set is convex and contains the origin, so its boundary is
    /// reached by bisection along rays. Sweep angles, then refine the best one.
    pub fn boundary_min(&self) -> f64 {
        let obj = |y: [f64; 2]| self.c[0] * y[0] + self.c[1] * y[1];
        let ray = |th: f64| {
            let d = [th.cos(), th.sin()];
            let tmax = 2.0 / d[0].abs().max(d[1].abs());
            let (mut lo, mut hi) = (0.0, tmax);
            if self.feasible([tmax * d[0], tmax * d[1]]) {
                lo = tmax;
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.feasible([mid * d[0], mid * d[1]]) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            obj([lo * d[0], lo * d[1]])
        };
        let steps = 20_000;
        let h = std::f64::consts::TAU / steps as f64;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for k in 0..steps {
            let v = ray(k as f64 * h);
            if v < best {
                best = v;
                arg = k as f64 * h;
            }
        }
        for k in -20_000..=20_000 {
            best = best.min(ray(arg + k as f64 * h * 1e-4));
        }
        best
    }
}

