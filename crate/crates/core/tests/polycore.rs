use proptest::prelude::*;
use sosrelax::poly::{basis_size, enumerate_basis};
use sosrelax::{Block, GramPairing, MonomialBasis, MultiIndex, Polynomial};

fn poly_in(n: usize, d: u32, ints: bool) -> impl Strategy<Value = Polynomial> {
    let len = basis_size(n, d).unwrap();
    let coef = if ints {
        (-20i32..=20).prop_map(f64::from).boxed()
    } else {
        (-3.0f64..3.0).boxed()
    };
    prop::collection::vec(coef, len)
        .prop_map(move |c| Polynomial::from_coeffs(MonomialBasis::new(n, d).unwrap(), c).unwrap())
}

/// Two polynomials over the same variables, possibly of different degrees.
fn pair(ints: bool) -> impl Strategy<Value = (Polynomial, Polynomial)> {
    (1usize..=3, 0u32..=4, 0u32..=4)
        .prop_flat_map(move |(n, d1, d2)| (poly_in(n, d1, ints), poly_in(n, d2, ints)))
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n)
}

/// Coefficient of every monomial up to degree `d`, read through `coeff`.
fn dense(f: &Polynomial, d: u32) -> Vec<f64> {
    enumerate_basis(f.num_vars(), d)
        .unwrap()
        .iter()
        .map(|e| f.coeff(e))
        .collect()
}

#[test]
fn basis_length_formula() {
    for n in 1..=6 {
        for d in 0..=8 {
            assert_eq!(enumerate_basis(n, d).unwrap().len(), basis_size(n, d).unwrap());
        }
    }
}

#[test]
fn bases_are_prefix_stable() {
    for n in 1..=4 {
        for d in 0..8 {
            let small = enumerate_basis(n, d).unwrap();
            let big = enumerate_basis(n, d + 1).unwrap();
            assert_eq!(&big[..small.len()], &small[..]);
            for (k, e) in small.iter().enumerate() {
                assert_eq!(e.position(), k);
            }
        }
    }
}

#[test]
fn pairing_matches_brute_force() {
    for n in 1..=3 {
        for r in 0..=3 {
            let pairing = GramPairing::shared(n, r).unwrap();
            let half = enumerate_basis(n, r).unwrap();
            let full = enumerate_basis(n, 2 * r).unwrap();
            for (a, alpha) in full.iter().enumerate() {
                let mut want = Vec::new();
                for (b, beta) in half.iter().enumerate() {
                    for (g, gamma) in half.iter().enumerate() {
                        if b <= g && &beta.combine(gamma) == alpha {
                            want.push((b, g));
                        }
                    }
                }
                let mut got = pairing.pairs(a).to_vec();
                got.sort_unstable();
                want.sort_unstable();
                assert_eq!(got, want, "n={n} r={r} alpha={alpha:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn evaluation_is_linear((f, g) in pair(false), a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>()) {
        let n = f.num_vars();
        let x: Vec<f64> = (0..n).map(|k| ((seed >> (8 * k)) as u8 as f64) / 128.0 - 1.0).collect();
        let lhs = f.scale(a).add(&g.scale(b)).unwrap().evaluate(&x).unwrap();
        let rhs = a * f.evaluate(&x).unwrap() + b * g.evaluate(&x).unwrap();
        let size = (a * f.coeff_norm()).abs() + (b * g.coeff_norm()).abs() + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * size * 8.0, "{lhs} vs {rhs}");
    }

    #[test]
    fn gradient_commutes_with_add_and_scale((f, g) in pair(true), c in -5i32..=5) {
        let c = f64::from(c);
        let d = f.degree().max(g.degree());
        let sum = f.add(&g).unwrap().gradient();
        let fg = f.gradient();
        let gg = g.gradient();
        for k in 0..f.num_vars() {
            let split = fg[k].add(&gg[k]).unwrap();
            prop_assert_eq!(dense(&sum[k], d), dense(&split, d));
            let scaled = f.scale(c).gradient();
            prop_assert_eq!(dense(&scaled[k], d), dense(&fg[k].scale(c), d));
        }
    }

    #[test]
    fn gradient_matches_central_differences(
        f in (1usize..=3, 0u32..=5).prop_flat_map(|(n, d)| poly_in(n, d, false)),
        raw in point(3),
    ) {
        let n = f.num_vars();
        let x = &raw[..n];
        let h = 1e-5;
        for (k, dk) in f.gradient().iter().enumerate() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (f.evaluate(&xp).unwrap() - f.evaluate(&xm).unwrap()) / (2.0 * h);
            prop_assert!((dk.evaluate(x).unwrap() - fd).abs() <= 1e-6 * (1.0 + f.coeff_norm()));
        }
    }

    #[test]
    fn product_evaluates_pointwise(
        (f, g) in (1usize..=3).prop_flat_map(|n| (poly_in(n, 3, false), poly_in(n, 3, false))),
        raw in prop::collection::vec(point(3), 20),
    ) {
        let fg = f.mul(&g).unwrap();
        for x in &raw {
            let x = &x[..f.num_vars()];
            let want = f.evaluate(x).unwrap() * g.evaluate(x).unwrap();
            prop_assert!((fg.evaluate(x).unwrap() - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn subtracting_itself_gives_zero((f, _) in pair(false)) {
        prop_assert!(f.add(&f.scale(-1.0)).unwrap().is_zero());
    }

    #[test]
    fn lifts_read_the_right_block(
        f in (1usize..=3, 0u32..=4).prop_flat_map(|(n, d)| poly_in(n, d, false)),
        xs in point(3),
        ys in point(3),
    ) {
        let n = f.num_vars();
        let mut xy = xs[..n].to_vec();
        xy.extend_from_slice(&ys[..n]);
        let fx = f.evaluate(&xs[..n]).unwrap();
        let fy = f.evaluate(&ys[..n]).unwrap();
        prop_assert!((f.lift_to_xy(Block::X).unwrap().evaluate(&xy).unwrap() - fx).abs() <= 1e-12 * (1.0 + fx.abs()));
        prop_assert!((f.lift_to_xy(Block::Y).unwrap().evaluate(&xy).unwrap() - fy).abs() <= 1e-12 * (1.0 + fy.abs()));
    }

    #[test]
    fn monomial_positions_round_trip(n in 1usize..=4, d in 0u32..=6) {
        let basis = MonomialBasis::new(n, d).unwrap();
        for (k, e) in basis.monomials().iter().enumerate() {
            prop_assert_eq!(basis.position(e), Some(k));
            prop_assert_eq!(MultiIndex::new(e.exponents().to_vec()).position(), k);
        }
    }
}
