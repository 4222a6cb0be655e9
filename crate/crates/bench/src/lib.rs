//! Fixed workloads shared by the benchmarks.

use sosrelax::spectra::Spectrahedron;
use sosrelax::ssafunc::{SsaFunction, SsaProgram};
use sosrelax::{ConeSpec, LinearForm, Polynomial, SdpProblem};

fn var(n: usize, k: usize) -> Polynomial {
    Polynomial::variable(n, k).unwrap()
}

/// min x1^4 - x2 subject to |x|^2 + 2|x| - 1 <= 0.
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

/// l1-regularized least squares in `n` variables with a ball constraint.
pub fn lasso(n: usize) -> SsaProgram {
    let a: Vec<Vec<f64>> = (0..n + 1)
        .map(|i| (0..n).map(|j| ((i * 7 + j * 3) % 5) as f64 / 4.0 - 0.5).collect())
        .collect();
    let b: Vec<f64> = (0..n + 1).map(|i| (i % 3) as f64 - 1.0).collect();
    let f = SsaFunction::least_squares_l1(&a, &b, 0.5).unwrap();
    let mut g = Polynomial::constant(n, -4.0).unwrap();
    for k in 0..n {
        g = g.add(&var(n, k).square().unwrap()).unwrap();
    }
    SsaProgram::new(f, vec![SsaFunction::polynomial(g).unwrap()]).unwrap()
}

/// `max mu` with `X - mu I >= 0` for a fixed `k x k` matrix `X`, i.e. its
/// smallest eigenvalue.
pub fn min_eig_sdp(k: usize) -> SdpProblem {
    let mut p = SdpProblem::maximize(ConeSpec::new(vec![k], 0, 1))
        .with_objective(LinearForm::new().free(0, 1.0));
    for i in 0..k {
        for j in 0..=i {
            let x = if i == j { 2.0 + i as f64 } else { 1.0 / (1 + i + j) as f64 };
            let mut f = LinearForm::new().psd(0, i, j, 1.0);
            if i == j {
                f.push_free(0, 1.0);
            }
            p.add_eq(f, x);
        }
    }
    p
}

/// `x1^8 + x1^2 + x1 x2 + x2^2`.
pub fn octic() -> Polynomial {
    let x1 = var(2, 0);
    let x2 = var(2, 1);
    x1.pow(8)
        .unwrap()
        .add(&x1.square().unwrap())
        .unwrap()
        .add(&x1.mul(&x2).unwrap())
        .unwrap()
        .add(&x2.square().unwrap())
        .unwrap()
}
