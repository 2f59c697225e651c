use biflab_core::moduli2::{
    coords, coords_with_residual, count_table, multiplier_pair, n2, normal_form, per1_line, per_curve_samples, pn,
};
use biflab_core::ratmap::RationalMap;
use biflab_core::{CPoly, Complex64, Error, ModuliPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

fn random_quadratic() -> impl Strategy<Value = RationalMap> {
    (complex(1.5), complex(1.5), complex(1.5), complex(1.5))
        .prop_filter_map("resultant too small", |(a0, a1, b0, b1)| {
            RationalMap::new(CPoly::new(vec![a0, a1, c(1.0, 0.0)]), CPoly::new(vec![b0, b1])).ok()
        })
}

fn disc_point(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    Complex64::from_polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

#[test]
fn normal_form_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let lambda = ModuliPoint::new(
            c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
        );
        let f = normal_form(&lambda).unwrap();
        let back = coords(&f).unwrap();
        assert!(back.distance(&lambda) < 1e-9, "{lambda:?} -> {back:?}");
    }
}

#[test]
fn chebyshev_and_inversion_coordinates() {
    // z^2 - 2: multipliers 0 at infinity, 4 at z = 2, -2 at z = -1
    let cheb = RationalMap::new(CPoly::new(vec![c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]), CPoly::new(vec![c(1.0, 0.0)]))
        .unwrap();
    let p = coords(&cheb).unwrap();
    assert!(p.distance(&ModuliPoint::new(c(2.0, 0.0), c(-8.0, 0.0))) < 1e-10);

    // z + 1/z: infinity is a triple fixed point of multiplier 1
    let f = RationalMap::new(CPoly::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]), CPoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)]))
        .unwrap();
    let lambda = coords(&f).unwrap();
    assert!(lambda.distance(&ModuliPoint::new(c(3.0, 0.0), c(3.0, 0.0))) < 1e-6);
    assert_eq!(normal_form(&lambda).unwrap_err().kind(), "DegenerateModuli");

    // z + 1/z scaled by 1/2 is conjugate to z^2 by a Mobius map
    let g = RationalMap::new(CPoly::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]), CPoly::new(vec![c(0.0, 0.0), c(2.0, 0.0)]))
        .unwrap();
    let lambda = coords(&g).unwrap();
    let before = lambda.fixed_multipliers().unwrap();
    let after = coords(&normal_form(&lambda).unwrap()).unwrap().fixed_multipliers().unwrap();
    for w in before {
        assert!(after.iter().any(|v| (v - w).norm() < 1e-8), "{w}");
    }
    assert!(lambda.distance(&ModuliPoint::new(c(2.0, 0.0), c(0.0, 0.0))) < 1e-9);
}

#[test]
fn multiplier_poly_matches_cycles() {
    let lambda = ModuliPoint::new(c(1.3, 0.4), c(-0.7, 2.1));
    let f = normal_form(&lambda).unwrap();
    for n in 1..=4 {
        let p = pn(&lambda, n).unwrap();
        assert_eq!(p.degree(), [3, 1, 2, 3][n as usize - 1]);
        for w in f.exact_cycles(n).unwrap().multipliers() {
            assert!(p.roots.iter().any(|r| (r - w).norm() < 1e-8 * (1.0 + w.norm())), "n={n}: {w}");
        }
    }
}

#[test]
fn count_table_identity() {
    let t = count_table(20);
    assert_eq!(t.nu2(1), 2);
    for n in 1..=20u32 {
        let sum: u64 = (1..=n).filter(|k| n % k == 0).map(|k| t.nu2(k)).sum();
        assert_eq!(sum, 1 << n);
        assert_eq!(t.n2(n) * 2, t.nu2(n));
    }
}

#[test]
fn per_curve_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let w = disc_point(&mut rng, 0.95);
        let eta = disc_point(&mut rng, 0.95);
        for n in 1..=5 {
            let pts = per_curve_samples(n, w, eta).unwrap();
            assert_eq!(pts.len(), n2(n), "n={n} w={w} eta={eta}");
            let (a, b, k) = per1_line(eta);
            for p in &pts {
                assert!((a * p.l1 + b * p.l2 + k).norm() < 1e-8);
            }
        }
    }
}

#[test]
fn unresolved_far_intersections_are_a_count_mismatch() {
    // five of the fifteen points sit near |t| = 300, where the maps are close
    // to degenerate and period-5 cycles lose most of their digits
    let w = c(0.520_273_996_601_417_6, 0.650_599_315_657_768_9);
    let eta = c(-0.895_205_213_137_282_3, 0.035_169_979_927_695_06);
    match per_curve_samples(5, w, eta) {
        Err(Error::CountMismatch { found, expected, residuals }) => {
            assert_eq!((found, expected), (15, 15));
            assert!(residuals.iter().filter(|r| **r < 1e-6).count() >= 10, "{residuals:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn per_curve_six_points_at_period_four() {
    assert_eq!(per_curve_samples(4, c(0.2, 0.0), c(0.1, 0.0)).unwrap().len(), 6);
}

#[test]
fn multiplier_pair_is_injective_on_basilica_component() {
    let mut images = Vec::new();
    for i in 0..50 {
        let w = Complex64::from_polar(0.1 + 0.5 * (i % 5) as f64 / 5.0, 0.7 * i as f64);
        let eta = Complex64::from_polar(0.1 + 0.5 * (i / 5) as f64 / 10.0, 1.3 * i as f64);
        let lambda = per_curve_samples(2, w, eta).unwrap()[0];
        let (a, b) = multiplier_pair(&lambda, 1, 2).unwrap();
        assert!((a - eta).norm() < 1e-8 && (b - w).norm() < 1e-8, "{a} {b} vs {eta} {w}");
        images.push((a, b));
    }
    let mut spacing = f64::INFINITY;
    for i in 0..images.len() {
        for j in 0..i {
            let d = ((images[i].0 - images[j].0).norm_sqr() + (images[i].1 - images[j].1).norm_sqr()).sqrt();
            spacing = spacing.min(d);
        }
    }
    assert!(spacing > 1e-3, "{spacing}");
}

#[test]
fn airplane_pair() {
    let lambda = ModuliPoint::quadratic_polynomial(c(-1.754_877_666_246_693, 0.0));
    let (a, b) = multiplier_pair(&lambda, 1, 3).unwrap();
    assert!(a.norm() < 1e-9 && b.norm() < 1e-8, "{a} {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn index_relation(f in random_quadratic()) {
        let (_, residual) = coords_with_residual(&f).unwrap();
        prop_assert!(residual.norm() < 1e-10, "{}", residual);
    }

    #[test]
    fn fixed_multipliers_lie_on_per1_lines(f in random_quadratic()) {
        let lambda = coords(&f).unwrap();
        for p in f.periodic_points(1).unwrap() {
            let (a, b, k) = per1_line(p.multiplier);
            let r = a * lambda.l1 + b * lambda.l2 + k;
            prop_assert!(r.norm() < 1e-8, "{}", r);
        }
    }
}
