mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosrelax::relax::{
    build_dual, build_primal, jensen_gap, moment_matrix, solve_program, MomentVector, RelaxOptions,
    ReportStatus,
};
use sosrelax::soscert::CertifiedSosConvex;
use sosrelax::spectra::Spectrahedron;
use sosrelax::ssafunc::{SsaFunction, SsaProgram};
use sosrelax::{
    solve, ConeSpec, GramPairing, LinearForm, MonomialBasis, Polynomial, SdpPoint, SdpProblem,
    SolveStatus, SolverOptions, SymMatrix,
};

fn var(n: usize, k: usize) -> Polynomial {
    Polynomial::variable(n, k).unwrap()
}

fn random_poly(r: &mut ChaCha8Rng, n: usize, d: u32) -> Polynomial {
    let basis = MonomialBasis::new(n, d).unwrap();
    let c = (0..basis.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    Polynomial::from_coeffs(basis, c).unwrap()
}

fn point(r: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-s..s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn riesz_of_dirac_is_evaluation(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let x = point(&mut r, n, 1.5);
        let y = MomentVector::dirac(&x, 2).unwrap();
        for _ in 0..20 {
            let u = random_poly(&mut r, n, 4);
            let want = u.evaluate(&x).unwrap();
            prop_assert!((y.riesz(&u).unwrap() - want).abs() <= 1e-12 * (1.0 + u.coeff_norm() * 16.0));
        }
        prop_assert_eq!(y.riesz(&Polynomial::constant(n, 1.0).unwrap()).unwrap(), 1.0);
        prop_assert_eq!(y.first_moments(), x.clone());
    }

    #[test]
    fn riesz_is_linear(seed in any::<u64>(), a in -3i32..=3, b in -3i32..=3) {
        // integer data keeps every sum exact
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 2;
        let len = MonomialBasis::new(n, 4).unwrap().len();
        let ints = |r: &mut ChaCha8Rng| -> Vec<f64> { (0..len).map(|_| f64::from(r.gen_range(-5i32..=5))).collect() };
        let mut yv = ints(&mut r);
        yv[0] = 1.0;
        let y = MomentVector::new(n, 2, yv).unwrap();
        let u = Polynomial::from_coeffs(MonomialBasis::new(n, 4).unwrap(), ints(&mut r)).unwrap();
        let v = Polynomial::from_coeffs(MonomialBasis::new(n, 4).unwrap(), ints(&mut r)).unwrap();
        let (a, b) = (f64::from(a), f64::from(b));
        let combo = u.scale(a).add(&v.scale(b)).unwrap();
        prop_assert_eq!(y.riesz(&combo).unwrap(), a * y.riesz(&u).unwrap() + b * y.riesz(&v).unwrap());
    }

    #[test]
    fn dirac_moment_matrix_is_rank_one(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let rr = 1 + (seed / 3 % 2) as u32;
        let x = point(&mut r, n, 1.0);
        let m = MomentVector::dirac(&x, rr).unwrap().moment_matrix().unwrap();
        let z = MonomialBasis::new(n, rr).unwrap().evaluate_monomials(&x).unwrap();
        let mut eig = m.eigenvalues();
        eig.sort_by(f64::total_cmp);
        let top = eig.pop().unwrap();
        prop_assert!((top - z.iter().map(|v| v * v).sum::<f64>()).abs() <= 1e-10 * top);
        for e in eig {
            prop_assert!(e.abs() <= 1e-8, "{e}");
        }
    }

    #[test]
    fn trace_pairing_identity(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (n, rr) = (2, 2);
        let pairing = GramPairing::shared(n, rr).unwrap();
        let dim = pairing.gram_dim();
        let vals: Vec<f64> = (0..dim * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let w = SymMatrix::from_fn(dim, |i, j| vals[i.max(j) * dim + i.min(j)]);
        let coeffs = pairing.gram_coefficients(|i, j| w.get(i, j));
        let half = MonomialBasis::new(n, rr).unwrap();
        for alpha in 0..pairing.num_monomials() {
            // Tr(M_alpha W) where M_alpha is the 0/1 indicator of alpha in the moment pattern
            let mut e = vec![0.0; pairing.num_monomials()];
            e[alpha] = 1.0;
            let indicator = moment_matrix(&e, n, rr).unwrap();
            let mut brute = 0.0;
            for b in 0..half.len() {
                for g in 0..half.len() {
                    if half.monomial(b).combine(half.monomial(g)).position() == alpha {
                        brute += w.get(b, g);
                    }
                }
            }
            prop_assert!((indicator.trace_dot(&w) - brute).abs() <= 1e-12);
            prop_assert!((coeffs[alpha] - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn jensen_gap_of_quadratic_mixture_is_the_variance(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (point(&mut r, 2, 1.0), point(&mut r, 2, 1.0));
        // f = |x|^2 + g^T x
        let g = point(&mut r, 2, 1.0);
        let f = var(2, 0).square().unwrap().add(&var(2, 1).square().unwrap()).unwrap()
            .axpy(g[0], &var(2, 0)).unwrap().axpy(g[1], &var(2, 1)).unwrap();
        let cert = CertifiedSosConvex::certify(&f).unwrap();
        let y = MomentVector::mixture(&[(t, p.clone()), (1.0 - t, q.clone())], 1).unwrap();
        let dist2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
        let variance = t * (1.0 - t) * dist2;
        prop_assert!((jensen_gap(&y, &cert).unwrap() - variance).abs() <= 1e-12);
        let dirac = MomentVector::dirac(&p, 1).unwrap();
        prop_assert!(jensen_gap(&dirac, &cert).unwrap().abs() <= 1e-12);
    }
}

/// `min Tr(Z A0)` subject to `Tr(Z A_j) = -c_j`, `Tr(Z B_l) = 0`, `Z >= 0`: the
/// dual of maximizing `c^T y` over the set.
fn support_dual(omega: &Spectrahedron, c: &[f64]) -> SymMatrix {
    let mut p = SdpProblem::minimize(ConeSpec::new(vec![omega.t()], 0, 0))
        .with_objective(LinearForm::new().trace_with(0, omega.a0(), 1.0));
    for (aj, cj) in omega.a().iter().zip(c) {
        p.add_eq(LinearForm::new().trace_with(0, aj, 1.0), -cj);
    }
    for bl in omega.b() {
        p.add_eq(LinearForm::new().trace_with(0, bl, 1.0), 0.0);
    }
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.x.psd[0].clone()
}

#[test]
fn random_programs_satisfy_relaxation_invariants() {
    for seed in 0..10u64 {
        let n = 1 + (seed as usize % 2);
        let case = common::random_case(100 + seed, n);
        let primal = build_primal(&case.prog, true).unwrap();
        let dual = build_dual(&case.prog, true).unwrap();
        let asm = &primal.assembly;
        let nfun = asm.pieces.len();

        // one coefficient row per monomial; only the constant row sees mu
        let nmon = MonomialBasis::new(n, asm.d).unwrap().len();
        assert_eq!(primal.layout.coefficient_rows.len(), nmon);
        for (k, &row) in primal.layout.coefficient_rows.iter().enumerate() {
            let has_mu = primal.problem.eqs[row].form.free.iter().any(|&(v, c)| v == primal.layout.mu && c != 0.0);
            assert_eq!(has_mu, k == 0, "{}", case.label);
        }
        assert!(primal
            .problem
            .ineqs
            .iter()
            .all(|c| c.form.free.iter().all(|&(v, _)| v != primal.layout.mu)));

        // dual row families
        assert_eq!(dual.layout.ineq_rows.len(), nfun - 1);
        let m_total: usize = dual.assembly.pieces.iter().map(|p| p.m()).sum();
        let p_total: usize = dual.assembly.pieces.iter().map(|p| p.omega.p()).sum();
        assert_eq!(dual.layout.a_rows.iter().map(Vec::len).sum::<usize>(), m_total);
        assert_eq!(dual.layout.b_rows.iter().map(Vec::len).sum::<usize>(), p_total);

        let opts = SolverOptions::default();
        let ps = solve(&primal.problem, &opts).unwrap();
        let ds = solve(&dual.problem, &opts).unwrap();
        assert_eq!(ps.status, SolveStatus::Optimal, "{}", case.label);
        assert!(matches!(ds.status, SolveStatus::Optimal | SolveStatus::NumericalFailure));
        assert!(
            (ps.dual_value - ds.primal_value).abs() <= 1e-6 * (1.0 + ds.primal_value.abs()),
            "{}: {} vs {}",
            case.label,
            ps.dual_value,
            ds.primal_value
        );
        assert!(ps.primal_value <= ds.primal_value + 1e-7 * (1.0 + ds.primal_value.abs()));

        // bounded index sets force lambda to vanish with lambda_0
        for i in 1..nfun {
            if let Some(l0) = primal.layout.lambda0[i] {
                if ps.x.nonneg[l0] <= 1e-10 {
                    let norm: f64 = primal.layout.lambda[i].iter().map(|&k| ps.x.free[k].powi(2)).sum::<f64>().sqrt();
                    assert!(norm <= 1e-6, "{}: lambda {norm}", case.label);
                }
            }
        }

        // Dirac points with support duals are feasible and bound the dual value from above
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let basis = MonomialBasis::new(n, asm.d).unwrap();
        let mut tested = 0;
        while tested < 5 {
            let x = point(&mut r, n, 1.0);
            if !case.feasible(&x, 0.0) {
                continue;
            }
            tested += 1;
            let mut pt = SdpPoint::zeros(&dual.problem.cone);
            pt.psd[0] = MomentVector::dirac(&x, asm.d / 2).unwrap().moment_matrix().unwrap();
            for (i, piece) in dual.assembly.pieces.iter().enumerate() {
                if let Some(blk) = dual.layout.z_block[i] {
                    let c: Vec<f64> = piece.h[1..]
                        .iter()
                        .map(|h| Polynomial::from_coeffs(basis.clone(), h.clone()).unwrap().evaluate(&x).unwrap())
                        .collect();
                    pt.psd[blk] = support_dual(&piece.omega, &c);
                }
            }
            let viol = dual.problem.constraint_violation(&pt).max(dual.problem.cone_violation(&pt));
            assert!(viol <= 1e-6, "{}: violation {viol} at {x:?}", case.label);
            let value = dual.problem.objective_value(&pt);
            assert!(value >= ds.primal_value - 1e-6, "{}: {value} < {}", case.label, ds.primal_value);
            assert!((value - (case.objective)(&x)).abs() <= 1e-6 * (1.0 + value.abs()));
        }
    }
}

#[test]
fn analytic_programs() {
    let opts = RelaxOptions::default();

    // min x1 s.t. x1^2 - 1 <= 0
    let prog = SsaProgram::new(
        SsaFunction::polynomial(var(1, 0)).unwrap(),
        vec![SsaFunction::polynomial(var(1, 0).square().unwrap().add_constant(-1.0)).unwrap()],
    )
    .unwrap();
    let primal = build_primal(&prog, true).unwrap();
    let sol = solve(&primal.problem, &SolverOptions::default()).unwrap();
    assert!((sol.primal_value + 1.0).abs() < 1e-6, "{}", sol.primal_value);

    // zero objective with a slack constraint
    let prog = SsaProgram::new(
        SsaFunction::polynomial(Polynomial::zero(1).unwrap()).unwrap(),
        vec![SsaFunction::polynomial(var(1, 0).square().unwrap().add_constant(-1.0)).unwrap()],
    )
    .unwrap();
    let sol = solve(&build_primal(&prog, true).unwrap().problem, &SolverOptions::default()).unwrap();
    assert!(sol.primal_value.abs() < 1e-6);

    // min x1^4 - x2 s.t. |x|^2 <= 1
    let f0 = var(2, 0).pow(4).unwrap().sub(&var(2, 1)).unwrap();
    let g = var(2, 0).square().unwrap().add(&var(2, 1).square().unwrap()).unwrap().add_constant(-1.0);
    let prog = SsaProgram::new(
        SsaFunction::polynomial(f0).unwrap(),
        vec![SsaFunction::polynomial(g).unwrap()],
    )
    .unwrap();
    let rep = solve_program(&prog, &opts).unwrap();
    assert!((rep.val_dual + 1.0).abs() < 1e-5, "{rep:?}");
    let x = rep.x_star.unwrap();
    assert!(x[0].abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-4, "{x:?}");

    // min |x - c|^2 s.t. |x|^2 <= 100
    let c = [0.7, -1.3];
    let mut f0 = Polynomial::zero(2).unwrap();
    for k in 0..2 {
        f0 = f0.add(&var(2, k).add_constant(-c[k]).square().unwrap()).unwrap();
    }
    let g = var(2, 0).square().unwrap().add(&var(2, 1).square().unwrap()).unwrap().add_constant(-100.0);
    let prog = SsaProgram::new(
        SsaFunction::polynomial(f0).unwrap(),
        vec![SsaFunction::polynomial(g).unwrap()],
    )
    .unwrap();
    // the minimizer error is of order sqrt(duality gap), so this one needs a tighter gap
    let tight = RelaxOptions {
        solver: SolverOptions {
            gap_tol: 1e-11,
            ..SolverOptions::default()
        },
        ..RelaxOptions::default()
    };
    let rep = solve_program(&prog, &tight).unwrap();
    assert_eq!(rep.status, ReportStatus::Optimal, "{rep:?}");
    let x = rep.x_star.unwrap();
    assert!((x[0] - c[0]).abs() < 1e-5 && (x[1] - c[1]).abs() < 1e-5, "{x:?}");

    // min |x|_1 s.t. 1 - x1 - x2 <= 0
    let g = Polynomial::constant(2, 1.0).unwrap().sub(&var(2, 0)).unwrap().sub(&var(2, 1)).unwrap();
    let prog = SsaProgram::new(
        SsaFunction::l1_norm(2).unwrap(),
        vec![SsaFunction::polynomial(g).unwrap()],
    )
    .unwrap();
    let rep = solve_program(&prog, &opts).unwrap();
    assert_eq!(rep.status, ReportStatus::Optimal);
    assert!((rep.val_dual - 1.0).abs() < 1e-5);
    let x = rep.x_star.unwrap();
    let f = x[0].abs() + x[1].abs();
    assert!((f - 1.0).abs() <= 1e-4 && x[0] + x[1] >= 1.0 - 1e-6, "{x:?}");
}

#[test]
fn dual_moments_satisfy_jensen() {
    for seed in 0..6u64 {
        let case = common::random_case(200 + seed, 2);
        let rep = solve_program(&case.prog, &RelaxOptions::default()).unwrap();
        let y = rep.moments.expect("moments");
        assert!((y.values()[0] - 1.0).abs() <= 1e-8);
        let me = y.moment_matrix().unwrap().min_eig();
        assert!(me >= -1e-8, "{}: {me}", case.label);
        let fs = std::iter::once(case.prog.objective()).chain(case.prog.constraints());
        for f in fs {
            if let Ok(cert) = CertifiedSosConvex::certify(&f.h()[0]) {
                assert!(jensen_gap(&y, &cert).unwrap() >= -1e-7, "{}", case.label);
            }
        }
    }
}
