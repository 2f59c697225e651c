use biflab_core::currents::potential;
use biflab_core::mandelbrot::{center_measure, center_poly, critical_orbit_value, green_m, levin_gap, pn_roots};
use biflab_core::moduli2::{coords, count_table};
use biflab_core::ratmap::RationalMap;
use biflab_core::{CPoly, Complex64};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn circle(r: f64, k: usize) -> Vec<Complex64> {
    (0..k).map(|j| Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / k as f64)).collect()
}

#[test]
fn component_counts() {
    let table = count_table(10);
    for n in 1..=10 {
        let set = center_poly(n).unwrap();
        assert_eq!(set.count() as u64, table.n2(n), "n={n}");
        for &z in &set.centers {
            assert!(critical_orbit_value(z, n).norm() < 1e-8, "n={n} {z}");
            for k in (1..n).filter(|k| n % k == 0) {
                assert!(critical_orbit_value(z, k).norm() > 1e-6);
            }
        }
    }
}

#[test]
fn centers_are_closed_under_conjugation() {
    for n in [5, 7, 9] {
        let centers = center_poly(n).unwrap().centers;
        for z in &centers {
            let best = centers.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "n={n} {z}");
        }
    }
}

#[test]
fn centers_land_on_polynomial_line() {
    for z in center_poly(4).unwrap().centers {
        let f = RationalMap::new(CPoly::new(vec![z, c(0.0, 0.0), c(1.0, 0.0)]), CPoly::new(vec![c(1.0, 0.0)])).unwrap();
        let lambda = coords(&f).unwrap();
        assert!((lambda.l1 - 2.0).norm() < 1e-9, "{z}");
        assert!((lambda.l2 - 4.0 * z).norm() < 1e-9, "{z}");
    }
}

#[test]
fn root_count_of_pn() {
    for n in [6, 10, 12] {
        assert_eq!(pn_roots(n).unwrap().len(), 1 << (n - 1));
    }
}

/// Below this the gaps are double-precision noise on values of size 1.
const ROUND_OFF: f64 = 1e-12;

#[test]
fn levin_gap_decreases() {
    let points = circle(3.0, 16);
    let mut last = f64::INFINITY;
    let mut gaps = Vec::new();
    for n in [6, 8, 10, 12] {
        let gap = levin_gap(n, &points).unwrap();
        assert!(gap <= 1.1 * last + ROUND_OFF, "n={n}: {gap} after {last}");
        last = gap;
        gaps.push(gap);
    }
    assert!(gaps[3] <= gaps[1] + ROUND_OFF);
    assert!(gaps[3] < 5e-2);
}

#[test]
fn levin_gap_decreases_near_the_set() {
    // closer in, the gap is visible above round-off
    let points = circle(2.1, 16);
    let gaps: Vec<f64> = [4, 6, 8, 10].iter().map(|&n| levin_gap(n, &points).unwrap()).collect();
    for w in gaps.windows(2) {
        assert!(w[1] <= 1.1 * w[0] + ROUND_OFF, "{gaps:?}");
    }
    assert!(gaps[1] < 1e-3 * gaps[0]);
}

#[test]
fn far_field_and_period_five_potentials() {
    let gap = levin_gap(6, &[c(100.0, 0.0)]).unwrap();
    assert!(gap < 1e-2);
    let rho = center_measure(6).unwrap();
    assert!((potential(&rho, c(100.0, 0.0)).unwrap() - 100f64.ln()).abs() < 1e-2);

    let q5 = center_poly(5).unwrap();
    let weight = 1.0 / q5.count() as f64;
    let m = biflab_core::DiscreteMeasure::new(q5.centers.iter().map(|&z| (z, weight)).collect()).unwrap();
    assert!((potential(&m, c(3.0, 0.0)).unwrap() - green_m(c(3.0, 0.0), 50)).abs() < 5e-2);
}

#[test]
fn green_is_zero_on_centers() {
    for z in center_poly(6).unwrap().centers {
        assert_eq!(green_m(z, 200), 0.0);
    }
}
