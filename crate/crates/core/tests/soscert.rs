use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosrelax::soscert::{extract_decomposition, is_sos, is_sos_convex, SosVerdict};
use sosrelax::{Polynomial, SymMatrix};

fn quartic(c: [f64; 5]) -> Polynomial {
    Polynomial::from_terms(1, (0..5u32).map(|k| (vec![k], c[k as usize]))).unwrap()
}

/// Minimum of a univariate quartic with positive leading coefficient on a grid
/// that covers every critical point.
fn quartic_grid_min(c: [f64; 5]) -> f64 {
    let r = 1.0 + (0..4).map(|k| c[k].abs() * (k as f64) / (4.0 * c[4])).fold(0.0, f64::max);
    let steps = 200_000;
    let h = 2.0 * r / steps as f64;
    (0..=steps)
        .map(|i| {
            let x = -r + h * i as f64;
            (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0]
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_poly(r: &mut ChaCha8Rng, n: usize, d: u32) -> Polynomial {
    let basis = sosrelax::MonomialBasis::new(n, d).unwrap();
    let c = (0..basis.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    Polynomial::from_coeffs(basis, c).unwrap()
}

/// Convex quadratic plus a nonnegative combination of fourth powers of linear
/// forms: SOS-convex by construction.
fn random_sos_convex(r: &mut ChaCha8Rng, n: usize) -> Polynomial {
    let mut f = Polynomial::zero(n).unwrap();
    for _ in 0..n {
        let mut l = Polynomial::constant(n, r.gen_range(-0.5..0.5)).unwrap();
        for k in 0..n {
            l = l.axpy(r.gen_range(-1.0..1.0), &Polynomial::variable(n, k).unwrap()).unwrap();
        }
        f = f.add(&l.square().unwrap()).unwrap();
        f = f.axpy(r.gen_range(0.0..0.5), &l.pow(4).unwrap()).unwrap();
    }
    for k in 0..n {
        f = f.axpy(r.gen_range(-1.0..1.0), &Polynomial::variable(n, k).unwrap()).unwrap();
    }
    f
}

fn hessian(f: &Polynomial, x: &[f64]) -> SymMatrix {
    let g = f.gradient();
    let h: Vec<Vec<f64>> = g
        .iter()
        .map(|gi| gi.gradient().iter().map(|p| p.evaluate(x).unwrap()).collect())
        .collect();
    SymMatrix::from_fn(x.len(), |i, j| h[i][j])
}

fn coeff_gap(a: &Polynomial, b: &Polynomial) -> f64 {
    a.sub(b).unwrap().coeff_norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn univariate_quartics_agree_with_grid(
        c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, c3 in -1.0f64..1.0, c4 in 0.1f64..1.0,
    ) {
        let c = [c0, c1, c2, c3, c4];
        let min = quartic_grid_min(c);
        prop_assume!(min.abs() > 1e-3);
        let v = is_sos(&quartic(c)).unwrap();
        if min > 0.0 {
            prop_assert!(v.is_yes(), "min {min}: {v:?}");
        } else {
            prop_assert!(v.is_no(), "min {min}: {v:?}");
        }
    }

    #[test]
    fn sums_of_squares_round_trip(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 2) as usize;
        let f = random_poly(&mut r, n, 2).square().unwrap()
            .add(&random_poly(&mut r, n, 2).square().unwrap()).unwrap();
        let v = is_sos(&f).unwrap();
        let cert = v.certificate().expect("sum of squares certified");
        prop_assert!(cert.min_eig() >= -1e-8);
        let scale = 1.0 + f.coeff_norm();
        prop_assert!(cert.residual <= 1e-6 * scale);
        let gap = coeff_gap(&cert.reconstruct().unwrap(), &f);
        prop_assert!((gap - cert.residual).abs() <= 1e-12 * scale, "gap {gap} residual {}", cert.residual);
        let dec = extract_decomposition(cert).unwrap();
        prop_assert!(coeff_gap(&dec.sum_of_squares().unwrap(), &f) <= 1e-6 * scale);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
            let size = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt().powi(4);
            prop_assert!(f.evaluate(&x).unwrap() >= -1e-6 * size);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certified_sos_convex_has_psd_hessian_and_sums(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 2) as usize;
        let f = random_sos_convex(&mut r, n);
        let g = random_sos_convex(&mut r, n);
        let vf = is_sos_convex(&f).unwrap();
        prop_assert!(vf.is_yes(), "{vf:?}");
        prop_assert!(is_sos_convex(&g).unwrap().is_yes());
        for _ in 0..200 {
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
            prop_assert!(hessian(&f, &x).min_eig() >= -1e-5);
        }
        let cert = vf.certificate().unwrap();
        let scale = 1.0 + cert.target.coeff_norm();
        let gap = coeff_gap(&cert.reconstruct().unwrap(), &cert.target);
        prop_assert!(cert.residual <= 1e-6 * scale);
        prop_assert!((gap - cert.residual).abs() <= 1e-12 * scale, "gap {gap} residual {}", cert.residual);
        let sum = is_sos_convex(&f.add(&g).unwrap()).unwrap();
        prop_assert!(sum.is_yes(), "{sum:?}");
    }
}

#[test]
fn known_sos_convex_examples() {
    let x1 = Polynomial::variable(2, 0).unwrap();
    let x2 = Polynomial::variable(2, 1).unwrap();
    let f = x1
        .pow(8)
        .unwrap()
        .add(&x1.square().unwrap())
        .unwrap()
        .add(&x1.mul(&x2).unwrap())
        .unwrap()
        .add(&x2.square().unwrap())
        .unwrap();
    assert!(is_sos_convex(&f).unwrap().is_yes());
    let cube = Polynomial::variable(1, 0).unwrap().pow(3).unwrap();
    assert!(matches!(is_sos_convex(&cube).unwrap(), SosVerdict::No(_)));
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        // x^T L L^T x + b^T x + c
        let mut q = Polynomial::constant(3, r.gen_range(-1.0..1.0)).unwrap();
        for _ in 0..2 {
            let mut l = Polynomial::zero(3).unwrap();
            for k in 0..3 {
                l = l.axpy(r.gen_range(-1.0..1.0), &Polynomial::variable(3, k).unwrap()).unwrap();
            }
            q = q.add(&l.square().unwrap()).unwrap();
        }
        for k in 0..3 {
            q = q.axpy(r.gen_range(-1.0..1.0), &Polynomial::variable(3, k).unwrap()).unwrap();
        }
        assert!(is_sos_convex(&q).unwrap().is_yes(), "{q}");
    }
}

#[test]
fn squared_quadratic_factors_into_one_term() {
    let f = quartic([1.0, 0.0, -2.0, 0.0, 1.0]);
    let v = is_sos(&f).unwrap();
    let dec = extract_decomposition(v.certificate().unwrap()).unwrap();
    assert!(coeff_gap(&dec.sum_of_squares().unwrap(), &f) <= 1e-6);
    let big: Vec<_> = dec.terms.iter().filter(|t| t.coeff_norm() > 1e-4).collect();
    assert_eq!(big.len(), 1, "{:?}", dec.terms);
    let t = big[0];
    let sign = t.coeff(&vec![2].into()).signum();
    let want = quartic([-1.0, 0.0, 1.0, 0.0, 0.0]).scale(sign);
    assert!(coeff_gap(&t.with_degree_bound(4).unwrap(), &want) <= 1e-4, "{t}");
}

#[test]
fn zero_margin_sos_convex_is_certified() {
    // nearly rank-one Hessian form: the optimal margin is zero
    let mut r = ChaCha8Rng::seed_from_u64(8267015117460635641);
    let _ = random_sos_convex(&mut r, 2);
    let g = random_sos_convex(&mut r, 2);
    let v = is_sos_convex(&g).unwrap();
    let cert = v.certificate().expect("certified");
    assert!(cert.min_eig() >= -1e-8);
    assert!(cert.residual <= 1e-6 * (1.0 + cert.target.coeff_norm()));
}

#[test]
fn negligible_unreachable_term_is_left_in_the_residual() {
    let mut r = ChaCha8Rng::seed_from_u64(10309201107632178394);
    let _ = random_sos_convex(&mut r, 1);
    let g = random_sos_convex(&mut r, 1);
    let v = is_sos_convex(&g).unwrap();
    let cert = v.certificate().expect("certified");
    assert!(cert.residual <= 1e-6 * (1.0 + cert.target.coeff_norm()));
    let x = Polynomial::variable(1, 0).unwrap();
    assert!(is_sos_convex(&x.pow(3).unwrap()).unwrap().is_no());
}
