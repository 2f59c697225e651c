use biflab_core::currents::{
    discrete_ddc, equidist_gap, field_eval, theta_average_mass, ComplexGrid, FieldKind, Region, ScalarField,
};
use biflab_core::lyapunov::family_ln0;
use biflab_core::mandelbrot::center_poly;
use biflab_core::moduli2::Slice;
use biflab_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Grid covering `region` with a margin, nodes on multiples of `h` from the
/// lower-left corner.
fn grid_around(region: &Region, margin: f64, h: f64) -> ComplexGrid {
    let nx = ((region.re_max - region.re_min + 2.0 * margin) / h).round() as usize + 1;
    let ny = ((region.im_max - region.im_min + 2.0 * margin) / h).round() as usize + 1;
    ComplexGrid::new(c(region.re_min - margin, region.im_min - margin), h, nx, ny).unwrap()
}

fn standard_grid() -> ComplexGrid {
    ComplexGrid::new(c(-2.5, -1.5), 0.01, 350, 300).unwrap()
}

#[test]
fn ln0_field_matches_family_pointwise() {
    let slice = Slice::polynomial_line();
    let grid = ComplexGrid::new(c(-0.3, -0.2), 0.1, 5, 4).unwrap();
    let field = field_eval(&slice, 2, FieldKind::Ln0, &grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let t = grid.node(i, j);
            let direct = family_ln0(&slice.at(t), 2).unwrap().value;
            assert!((field.get(i, j) - direct).abs() < 1e-9, "{t}");
        }
    }
}

#[test]
fn node_on_center_is_masked() {
    let slice = Slice::polynomial_line();
    // c = -1 is the period-2 center
    let grid = ComplexGrid::new(c(-1.1, -0.1), 0.1, 3, 3).unwrap();
    let field = field_eval(&slice, 2, FieldKind::Ln0, &grid);
    assert!(field.is_masked(1, 1));
    assert_eq!(field.masked_count(), 1);
}

#[test]
fn l_field_is_ln2_in_main_cardioid() {
    let slice = Slice::polynomial_line();
    let grid = ComplexGrid::new(c(-0.2, -0.2), 0.1, 5, 5).unwrap();
    let field = field_eval(&slice, 0, FieldKind::L, &grid);
    for v in &field.values {
        assert!((v - std::f64::consts::LN_2).abs() < 5e-3);
    }
}

#[test]
fn ln_fields_are_nonnegative() {
    let grid = ComplexGrid::new(c(-1.2, -0.6), 0.15, 8, 8).unwrap();
    for slice in [Slice::polynomial_line(), Slice::per1(c(0.0, 0.3))] {
        for n in [2, 4] {
            let field = field_eval(&slice, n, FieldKind::Ln, &grid);
            assert!(field.masked_count() < grid.len() / 10);
            for v in field.values.iter().filter(|v| v.is_finite()) {
                assert!(*v >= 0.0, "{v}");
            }
        }
    }
}

#[test]
fn gap_shrinks_on_standard_slice() {
    let slice = Slice::polynomial_line();
    let grid = standard_grid();
    let mut last = f64::INFINITY;
    for n in [4, 6, 8, 10] {
        let gap = equidist_gap(&slice, n, &grid).unwrap();
        assert!(gap.l1 <= 1.1 * last, "n={n}: {} after {last}", gap.l1);
        last = gap.l1;
    }
}

#[test]
fn gap_is_small_inside_main_cardioid() {
    let slice = Slice::polynomial_line();
    let grid = ComplexGrid::new(c(-0.2, -0.2), 0.01, 41, 41).unwrap();
    let gap = equidist_gap(&slice, 10, &grid).unwrap();
    assert!(gap.l1 < 1e-2, "{gap:?}");
    assert!(gap.box_mass < 1e-3);
}

#[test]
fn bifurcation_nodes_have_nearby_centers() {
    let h = 0.02;
    let slice = Slice::polynomial_line();
    let grid = ComplexGrid::new(c(-2.2, -1.2), h, 140, 120).unwrap();
    let ddc = discrete_ddc(&field_eval(&slice, 0, FieldKind::L, &grid)).unwrap();
    let centers: Vec<Complex64> = (1..=10).flat_map(|k| center_poly(k).unwrap().centers).collect();
    let flagged: Vec<Complex64> = ddc.signed_atoms().iter().filter(|a| a.1 > 1e-3).map(|a| a.0).collect();
    assert!(flagged.len() > 50);
    for z in flagged {
        assert!(centers.iter().any(|k| (k - z).norm() <= 3.0 * h), "{z}");
    }
}

#[test]
fn theta_masses_vanish_inside_a_component() {
    let slice = Slice::polynomial_line();
    let region = Region::new(-0.2, 0.2, -0.2, 0.2);
    let grid = grid_around(&region, 0.05, 0.01);
    let m = theta_average_mass(&slice, 2, 16, &region, &grid).unwrap();
    assert!(m.ddc_mass.abs() < 1e-3 && m.theta_mass < 1e-3, "{m:?}");
}

#[test]
fn theta_masses_agree_across_basilica_boundary() {
    let slice = Slice::polynomial_line();
    let region = Region::new(-1.3, -0.6, -0.35, 0.35);
    let grid = grid_around(&region, 0.05, 0.01);
    let m = theta_average_mass(&slice, 2, 64, &region, &grid).unwrap();
    assert!(((m.ddc_mass - m.theta_mass) / m.theta_mass).abs() < 0.1, "{m:?}");

    let finer = theta_average_mass(&slice, 2, 128, &region, &grid).unwrap();
    assert!((finer.theta_mass - m.theta_mass).abs() <= m.quadrature.max(1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn log_field_has_unit_mass(re in -0.5f64..0.5, im in -0.5f64..0.5) {
        let a = c(re, im);
        for h in [0.02f64, 0.01] {
            let n = (2.0 / h).round() as usize + 1;
            let grid = ComplexGrid::new(c(-1.0, -1.0), h, n, n).unwrap();
            let field = ScalarField::from_fn(grid, |z| Some((z - a).norm().ln()));
            let mass = discrete_ddc(&field).unwrap().signed_total;
            prop_assert!((mass - 1.0).abs() <= 2.0 * h, "h={} mass={}", h, mass);
        }
    }

    #[test]
    fn harmonic_fields_have_no_mass(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = ComplexGrid::new(c(-1.0, -1.0), 0.05, 41, 41).unwrap();
        let field = ScalarField::from_fn(grid, |z| Some((c(a, b) * z * z * z).re + z.im));
        prop_assert!(discrete_ddc(&field).unwrap().signed_total.abs() < 1e-8);
    }
}
