use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosrelax::spectra::{svec, Boundedness, Spectrahedron};
use sosrelax::SymMatrix;

/// `{y in R^2 : C y <= d}` with `d > 0`, plus the box `|y_i| <= 3`.
struct Polygon {
    c: Vec<[f64; 2]>,
    d: Vec<f64>,
}

fn random_polygon(r: &mut ChaCha8Rng) -> Polygon {
    let mut c = vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let mut d = vec![3.0; 4];
    for _ in 0..r.gen_range(2..6) {
        let th: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        c.push([th.cos(), th.sin()]);
        d.push(r.gen_range(0.2..2.0));
    }
    Polygon { c, d }
}

impl Polygon {
    fn spectrahedron(&self) -> Spectrahedron {
        let a0 = SymMatrix::from_diagonal(&self.d);
        let a = (0..2)
            .map(|j| SymMatrix::from_diagonal(&self.c.iter().map(|row| -row[j]).collect::<Vec<_>>()))
            .collect();
        Spectrahedron::from_lmi(a0, a, Vec::new()).unwrap()
    }

    /// Intersections of every pair of edges that satisfy all inequalities.
    fn vertices(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for i in 0..self.c.len() {
            for j in i + 1..self.c.len() {
                let (a, b) = (self.c[i], self.c[j]);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let y = [
                    (self.d[i] * b[1] - a[1] * self.d[j]) / det,
                    (a[0] * self.d[j] - self.d[i] * b[0]) / det,
                ];
                if self.c.iter().zip(&self.d).all(|(r, &d)| r[0] * y[0] + r[1] * y[1] <= d + 1e-9) {
                    out.push(y);
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn polygon_maximum_matches_vertices(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let poly = random_polygon(&mut r);
        let omega = poly.spectrahedron();
        let verts = poly.vertices();
        for _ in 0..5 {
            let c = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            let want = verts.iter().map(|v| dot(&c, v)).fold(f64::NEG_INFINITY, f64::max);
            let got = omega.maximize_linear(&c).unwrap();
            prop_assert!((got.value - want).abs() <= 1e-6, "{} vs {want}", got.value);
            prop_assert!(omega.contains(&got.y).unwrap().is_yes());
            let low = omega.maximize_linear(&[-c[0], -c[1]]).unwrap();
            prop_assert!(got.value + low.value >= -1e-9);
        }
    }

    #[test]
    fn scaled_simplex_ranges(m in 1usize..=4, s in 0.1f64..5.0) {
        // y >= 0 and sum y <= s
        let mut a0 = vec![0.0; m + 1];
        a0[m] = s;
        let a = (0..m)
            .map(|j| {
                let mut d = vec![0.0; m + 1];
                d[j] = 1.0;
                d[m] = -1.0;
                SymMatrix::from_diagonal(&d)
            })
            .collect();
        let omega = Spectrahedron::from_lmi(SymMatrix::from_diagonal(&a0), a, Vec::new()).unwrap();
        match omega.assert_bounded().unwrap() {
            Boundedness::Bounded(ranges) => {
                for (lo, hi) in ranges {
                    prop_assert!(lo.abs() <= 1e-6 && (hi - s).abs() <= 1e-6 * (1.0 + s));
                }
            }
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn trace_one_support_is_largest_eigenvalue(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let k = 2 + (seed % 2) as usize;
        let vals: Vec<f64> = (0..k * k).map(|_| r.gen_range(-1.0..1.0)).collect();
        let x = SymMatrix::from_fn(k, |i, j| vals[i.max(j) * k + i.min(j)]);
        let got = Spectrahedron::psd_trace_one(k).unwrap().maximize_linear(&svec(&x)).unwrap();
        prop_assert!((got.value - x.max_eig()).abs() <= 1e-6, "{} vs {}", got.value, x.max_eig());
    }

    #[test]
    fn product_membership_is_componentwise(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ball = Spectrahedron::l2_ball(2).unwrap();
        let simplex = Spectrahedron::simplex(2).unwrap();
        let corner = Spectrahedron::corner_simplex(2).unwrap();
        let prod = ball.product(&simplex);
        let left = ball.product(&simplex).product(&corner);
        let right = ball.product(&simplex.product(&corner));
        for _ in 0..100 {
            let y1 = [r.gen_range(-1.2..1.2), r.gen_range(-1.2..1.2)];
            let a: f64 = r.gen_range(-0.3..1.3);
            let y2 = if r.gen_bool(0.5) { [a, 1.0 - a] } else { [a, r.gen_range(-0.3..1.3)] };
            let y3 = [r.gen_range(-0.2..1.0), r.gen_range(-0.2..1.0)];
            let near = |v: f64| v.abs() < 1e-4;
            if near(dot(&y1, &y1) - 1.0) || near(y2[0]) || near(y2[1]) || near(y3[0]) || near(y3[1]) || near(y3[0] + y3[1] - 1.0) {
                continue;
            }
            let all: Vec<f64> = y1.iter().chain(&y2).copied().collect();
            let want = ball.contains(&y1).unwrap().is_yes() && simplex.contains(&y2).unwrap().is_yes();
            prop_assert_eq!(prod.contains(&all).unwrap().is_yes(), want);
            let mut three = all.clone();
            three.extend_from_slice(&y3);
            prop_assert_eq!(
                left.contains(&three).unwrap().is_yes(),
                right.contains(&three).unwrap().is_yes()
            );
        }
    }
}

#[test]
fn simplex_on_a_fine_grid() {
    let s = Spectrahedron::simplex(2).unwrap();
    for i in 0..=1000 {
        let a = i as f64 * 1e-3;
        assert!(s.contains(&[a, 1.0 - a]).unwrap().is_yes());
        assert!(!s.contains(&[a, 1.0 - a + 1e-3]).unwrap().is_yes());
        assert!(!s.contains(&[a, 1.0 - a - 1e-3]).unwrap().is_yes());
    }
    assert!(!s.contains(&[-1e-3, 1.001]).unwrap().is_yes());
}

#[test]
fn singleton_factor_leaves_membership_alone() {
    let ball = Spectrahedron::l2_ball(2).unwrap();
    let point = Spectrahedron::box_set(&[0.3], &[0.3]).unwrap();
    let prod = ball.product(&point);
    for y in [[0.6, 0.8], [0.7, 0.8], [0.0, 0.0], [-0.5, 0.9]] {
        assert_eq!(
            prod.contains(&[y[0], y[1], 0.3]).unwrap().is_yes(),
            ball.contains(&y).unwrap().is_yes()
        );
    }
}

#[test]
fn separable_objective_over_product() {
    let ball = Spectrahedron::l2_ball(2).unwrap();
    let prod = ball.product(&Spectrahedron::simplex(3).unwrap());
    let single = ball.maximize_linear(&[3.0, 4.0]).unwrap();
    let both = prod.maximize_linear(&[3.0, 4.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((single.value - 5.0).abs() < 1e-6);
    assert!((both.value - single.value).abs() < 1e-6);
}

#[test]
fn constructors_are_bounded() {
    let sets = [
        Spectrahedron::simplex(3).unwrap(),
        Spectrahedron::corner_simplex(3).unwrap(),
        Spectrahedron::l2_ball(3).unwrap(),
        Spectrahedron::box_set(&[-1.0, 0.0], &[2.0, 0.5]).unwrap(),
        Spectrahedron::psd_trace_one(2).unwrap(),
        Spectrahedron::psd_trace_one_reduced(3).unwrap(),
    ];
    for s in &sets {
        assert!(matches!(s.assert_bounded().unwrap(), Boundedness::Bounded(_)), "{s:?}");
    }
    let ball = &sets[2];
    assert!(ball.contains(&[1.0, 0.0, 0.0]).unwrap().is_yes());
    assert!(ball.pencil(&[1.0, 0.0, 0.0], &[]).min_eig().abs() < 1e-12);
}
