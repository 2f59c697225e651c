use biflab_core::ratmap::{exact_period_count, divisors, HomogeneousLift, Mobius, RationalMap, SpherePoint, Stability};
use biflab_core::{CPoly, Complex64};
use proptest::prelude::*;

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

/// Greedy nearest matching; the largest distance used.
fn match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm() / (1.0 + x.norm())))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn square_map_period_twelve_multipliers() {
    let f = RationalMap::power(2).unwrap();

    let pts = f.periodic_points(12).unwrap();
    assert_eq!(pts.len(), 4097);
    let on_circle: Vec<_> = pts.iter().filter(|p| p.point.to_affine().is_some_and(|z| z.norm() > 0.5)).collect();
    assert_eq!(on_circle.len(), 4095);
    for p in on_circle {
        let r = p.point.to_affine().unwrap().norm();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        assert!((p.multiplier - c(4096.0, 0.0)).norm() < 1e-8 * 4096.0);
    }
}

#[test]
fn cubic_period_nine_beyond_simultaneous_cap() {
    let f = RationalMap::power(3).unwrap();

    let pts = f.periodic_points(9).unwrap();
    assert_eq!(pts.len(), 19684);
    let mut superattracting = 0;
    for p in &pts {
        if p.multiplier.norm() < 1e-9 {
            superattracting += 1;
            continue;
        }
        let z = p.point.to_affine().unwrap();
        assert!((z.norm() - 1.0).abs() < 1e-12);
        // (z^(3^9) = z) <=> z^(3^9 - 1) = 1
        let k = z.arg() / std::f64::consts::TAU * 19682.0;
        assert!((k - k.round()).abs() < 1e-6);
        assert!((p.multiplier.norm() - 19683.0).abs() < 1e-6 * 19683.0);
    }
    assert_eq!(superattracting, 2);
}

#[test]
fn cubic_period_seven_exact_count() {
    let f = RationalMap::power(3).unwrap();

    let s = f.exact_cycles(7).unwrap();
    assert_eq!(s.point_count() as i64, exact_period_count(3, 7));
    assert!(s.cycles.iter().all(|cy| cy.stability == Stability::Repelling));
}

#[test]
fn rabbit_period_ten_count() {
    let f = RationalMap::quadratic(c(-0.12, 0.75));

    let s = f.exact_cycles(10).unwrap();
    assert_eq!(s.count(), 99);
}

#[test]
fn cycles_are_orbits() {
    let f = RationalMap::quadratic(c(0.28, 0.53));

    let s = f.exact_cycles(5).unwrap();
    for cy in &s.cycles {
        for (i, p) in cy.points.iter().enumerate() {
            let next = &cy.points[(i + 1) % cy.points.len()];
            assert!(f.apply(p).chordal(next) < 1e-9);
            for q in &cy.points[..i] {
                assert!(p.chordal(q) > 1e-8);
            }
        }
    }
}

#[test]
fn escape_rate_of_shifted_square_matches_long_orbit() {
    // z^2 + 3 from (3, 1): reference is the same lift at twice the length
    let lift = HomogeneousLift::new(vec![c(3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
        .unwrap();
    let short = lift.green((c(3.0, 0.0), c(1.0, 0.0)), 25).unwrap();
    let long = lift.green((c(3.0, 0.0), c(1.0, 0.0)), 50).unwrap();
    assert!((short.value - long.value).abs() < 1e-9);
    assert!(short.tail_bound < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugation_keeps_cycle_multipliers(
        f in random_quadratic(),
        m in (complex(2.0), complex(2.0), complex(2.0), complex(2.0)),
        n in 1u32..=4,
    ) {
        let mobius = Mobius::new(m.0, m.1, m.2, m.3);
        prop_assume!(mobius.det().norm() > 0.1);
        let g = f.conjugate(&mobius).unwrap();
        let (Ok(a), Ok(b)) = (f.exact_cycles(n), g.exact_cycles(n)) else {
            return Err(TestCaseError::reject("ambiguous period"));
        };
        prop_assert_eq!(a.count(), b.count());
        prop_assert!(match_distance(&a.multipliers(), &b.multipliers()) < 1e-8);
    }

    #[test]
    fn exact_counts_add_up(f in random_quadratic(), n in 1u32..=6) {
        let mut total = 0;
        for k in divisors(n) {
            match f.exact_cycles(k) {
                Ok(s) => total += s.point_count(),
                Err(_) => return Err(TestCaseError::reject("ambiguous period")),
            }
        }
        prop_assert_eq!(total, (1usize << n) + 1);
    }

    #[test]
    fn green_functional_equation(f in random_quadratic(), z in complex(3.0)) {
        let lift = f.lift();
        let (x, y) = lift.apply(z, c(1.0, 0.0));
        prop_assume!(x.norm() + y.norm() > 1e-6);
        let g0 = lift.green((z, c(1.0, 0.0)), 60).unwrap().value;
        let g1 = lift.green((x, y), 60).unwrap().value;
        prop_assert!((g1 - 2.0 * g0).abs() < 1e-9);
    }

    #[test]
    fn chordal_distance_is_chart_free(a in complex(5.0), b in complex(5.0)) {
        let inv = Mobius::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let (p, q) = (SpherePoint::affine(a), SpherePoint::affine(b));
        prop_assert!((p.chordal(&q) - inv.apply(&p).chordal(&inv.apply(&q))).abs() < 1e-12);
    }
}
