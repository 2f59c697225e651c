//! Scalar fields on one-dimensional slices of the moduli space, their
//! discrete `dd^c`, logarithmic potentials of atomic measures, and the
//! equidistribution diagnostics built on them.

use std::f64::consts::{LN_2, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{family_ln, family_ln0, lyap_cycles};
use crate::mandelbrot::green_m;
use crate::moduli2::{n2, normal_form, slice_roots, Slice};
use crate::ratmap::{divisors, exact_period_count, mobius};

/// Cycle order used for the reference field `L`.
pub const N_REF: u32 = 12;
const GREEN_ITERS: u32 = 400;

/// Rectangular grid `origin + i h + j h sqrt(-1)`, `i < nx`, `j < ny`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub origin: Complex64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ComplexGrid {
    pub fn new(origin: Complex64, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !origin.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing {h} must be positive")));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidInput(format!("grid {nx}x{ny} is smaller than 3x3")));
        }
        Ok(ComplexGrid { origin, h, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        self.origin + Complex64::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn node_at(&self, index: usize) -> Complex64 {
        self.node(index % self.nx, index / self.nx)
    }
}

/// Values on a grid, row-major in `j`; masked nodes hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: ComplexGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: ComplexGrid, f: impl Fn(Complex64) -> Option<f64> + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| match f(grid.node_at(k)) {
                Some(v) if v.is_finite() => v,
                _ => f64::NEG_INFINITY,
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        !self.get(i, j).is_finite()
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// CSV: header comment, grid comment, then one row per `j`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        out.push_str("# origin_re origin_im h nx ny\n");
        let _ = writeln!(out, "# {} {} {} {} {}", g.origin.re, g.origin.im, g.h, g.nx, g.ny);
        for row in self.values.chunks(g.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("scalar field csv: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines.next().filter(|l| l.starts_with('#')).ok_or_else(|| bad("missing header"))?;
        let spec = lines.next().and_then(|l| l.strip_prefix('#')).ok_or_else(|| bad("missing grid line"))?;
        let parts: Vec<&str> = spec.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(bad("grid line needs 5 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad size"));
        let grid = ComplexGrid::new(
            Complex64::new(num(parts[0])?, num(parts[1])?),
            num(parts[2])?,
            int(parts[3])?,
            int(parts[4])?,
        )?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            for tok in line.split(',') {
                values.push(tok.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
            }
        }
        if values.len() != grid.len() {
            return Err(bad("value count does not match grid"));
        }
        Ok(ScalarField { grid, values })
    }
}

/// Finite positive atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(Complex64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(z, w)| !(*w > 0.0) || !z.is_finite() || !w.is_finite()) {
            return Err(Error::InvalidInput("atoms need finite positive weights".into()));
        }
        Ok(DiscreteMeasure { atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn mass_in(&self, region: &Region) -> f64 {
        self.atoms.iter().filter(|(z, _)| region.contains(*z)).map(|(_, w)| w).sum()
    }

    /// `sum w_i ln|z - a_i|`, with compensated summation.
    pub fn potential(&self, z: Complex64) -> Result<f64> {
        let (mut acc, mut comp) = (0.0f64, 0.0f64);
        for &(a, w) in &self.atoms {
            let d = (z - a).norm();
            if d <= 1e-12 {
                return Err(Error::AtomCollision(a));
            }
            let term = w * d.ln();
            let t = acc + term;
            comp += if acc.abs() >= term.abs() { (acc - t) + term } else { (term - t) + acc };
            acc = t;
        }
        Ok(acc + comp)
    }
}

pub fn potential(m: &DiscreteMeasure, z: Complex64) -> Result<f64> {
    m.potential(z)
}

/// Axis-aligned rectangle in the slice parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Region {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re < self.re_max && z.im >= self.im_min && z.im < self.im_max
    }
}

/// Result of the discrete Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddc {
    /// Atoms with positive weight.
    pub measure: DiscreteMeasure,
    /// Atoms below `-1e-6`, removed from `measure`.
    pub clamped: Vec<(Complex64, f64)>,
    /// Sum of all weights, negative ones included.
    pub signed_total: f64,
    /// Interior stencils that touched a masked node.
    pub masked_stencils: usize,
    signed: Vec<(Complex64, f64)>,
}

impl Ddc {
    /// Signed mass of the nodes in `region`.
    pub fn signed_mass_in(&self, region: &Region) -> f64 {
        self.signed.iter().filter(|(z, _)| region.contains(*z)).map(|(_, w)| w).sum()
    }

    pub fn signed_atoms(&self) -> &[(Complex64, f64)] {
        &self.signed
    }
}

const CLAMP_LEVEL: f64 = -1e-6;

/// Five-point Laplacian times `h^2 / 2pi` at interior nodes, so that the
/// field `ln|z - a|` has unit mass.
pub fn discrete_ddc(field: &ScalarField) -> Result<Ddc> {
    let g = field.grid;
    let interior = (g.nx - 2) * (g.ny - 2);
    let masked_interior = (1..g.ny - 1)
        .flat_map(|j| (1..g.nx - 1).map(move |i| (i, j)))
        .filter(|&(i, j)| field.is_masked(i, j))
        .count();
    if masked_interior * 10 > interior {
        return Err(Error::TooManyMasked {
            masked: masked_interior,
            interior,
        });
    }
    let filled = fill_masked(field);
    let mut signed = Vec::with_capacity(interior);
    let mut clamped = Vec::new();
    let mut positive = Vec::with_capacity(interior);
    let mut masked_stencils = 0;
    let mut total = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let touches = [(i, j), (i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)]
                .iter()
                .any(|&(a, b)| field.is_masked(a, b));
            if touches {
                masked_stencils += 1;
            }
            let at = |a: usize, b: usize| filled[b * g.nx + a];
            let lap = at(i + 1, j) + at(i - 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * at(i, j);
            let w = lap / TAU;
            if !w.is_finite() {
                continue;
            }
            let z = g.node(i, j);
            total += w;
            signed.push((z, w));
            if w > 0.0 {
                positive.push((z, w));
            } else if w < CLAMP_LEVEL {
                clamped.push((z, w));
            }
        }
    }
    Ok(Ddc {
        measure: DiscreteMeasure { atoms: positive },
        clamped,
        signed_total: total,
        masked_stencils,
        signed,
    })
}

/// Masked nodes replaced by the mean of their unmasked 4-neighbours (or
/// 8-neighbours when all four are masked).
fn fill_masked(field: &ScalarField) -> Vec<f64> {
    let g = field.grid;
    let mut out = field.values.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !field.is_masked(i, j) {
                continue;
            }
            let avg = |offsets: &[(i64, i64)]| {
                let vals: Vec<f64> = offsets
                    .iter()
                    .filter_map(|&(di, dj)| {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        (a >= 0 && b >= 0 && (a as usize) < g.nx && (b as usize) < g.ny)
                            .then(|| field.get(a as usize, b as usize))
                    })
                    .filter(|v| v.is_finite())
                    .collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            let four = [(1, 0), (-1, 0), (0, 1), (0, -1)];
            let eight = [(1, 1), (1, -1), (-1, 1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)];
            if let Some(v) = avg(&four).or_else(|| avg(&eight)) {
                out[j * g.nx + i] = v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    L,
    Ln0,
    Ln,
}

/// `ln |P_k(c)|` for `k = 1..=n`, continued in logarithms once the orbit is
/// large (`ln|z^2 + c| = 2 ln|z|` to double precision there).
pub fn log_critical_orbit(c: Complex64, n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize);
    let mut z = c;
    let mut log = c.norm().ln();
    out.push(log);
    let mut big = false;
    for _ in 1..n {
        if !big && z.norm() > 1e100 {
            big = true;
        }
        if big {
            log *= 2.0;
        } else {
            z = z * z + c;
            log = z.norm().ln();
        }
        out.push(log);
    }
    out
}

/// `L_n^0(c)` on the polynomial line from the critical orbit:
/// `prod_{exact n} z = prod_{k | n} P_k(c)^mobius(n/k)` and each multiplier is
/// `prod 2z`, so
/// `ln|p_n(c, 0)| = nu(n) ln 2 + sum_{k | n} mobius(n/k) ln|P_k(c)|`.
pub fn polynomial_ln0(c: Complex64, n: u32) -> Option<f64> {
    if n == 1 {
        // infinity is a superattracting fixed point of every polynomial
        return None;
    }
    let logs = log_critical_orbit(c, n);
    let finite_points = exact_period_count(2, n) as f64;
    let mut acc = finite_points * LN_2;
    for k in divisors(n) {
        let mu = mobius(n / k);
        if mu != 0 {
            let l = logs[k as usize - 1];
            if !l.is_finite() {
                return None;
            }
            acc += mu as f64 * l;
        }
    }
    Some(acc * 2f64.powi(-(n as i32)))
}

/// `L(c) = ln 2 + G_M(c) / 2` on the polynomial line.
pub fn polynomial_l(c: Complex64) -> f64 {
    LN_2 + 0.5 * green_m(c, GREEN_ITERS)
}

/// Field of `L`, `L_n^0` or `L_n` over `grid` in the slice parameter.
/// Nodes where the evaluation fails or is `-inf` are masked.
pub fn field_eval(slice: &Slice, n: u32, which: FieldKind, grid: &ComplexGrid) -> ScalarField {
    let poly = slice.is_polynomial_line();
    ScalarField::from_fn(*grid, |t| match (which, poly) {
        (FieldKind::L, true) => Some(polynomial_l(t)),
        (FieldKind::Ln0, true) => polynomial_ln0(t, n),
        (FieldKind::L, false) => {
            let f = normal_form(&slice.at(t)).ok()?;
            lyap_cycles(&f, N_REF, false).ok().map(|e| e.value)
        }
        (FieldKind::Ln0, false) => family_ln0(&slice.at(t), n).ok().map(|e| e.value),
        (FieldKind::Ln, _) => family_ln(&slice.at(t), n).ok().map(|e| e.value),
    })
}

/// Potential-level and current-level distance between two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `h^2 sum |a - b|` over nodes unmasked in both.
    pub l1: f64,
    /// `|ddc(a)| - |ddc(b)|` signed total masses, in absolute value.
    pub box_mass: f64,
    pub masked: usize,
}

pub fn field_gap(a: &ScalarField, b: &ScalarField) -> Result<GapReport> {
    if a.grid != b.grid {
        return Err(Error::InvalidInput("fields live on different grids".into()));
    }
    let h2 = a.grid.h * a.grid.h;
    let mut l1 = 0.0;
    let mut masked = 0;
    for (x, y) in a.values.iter().zip(&b.values) {
        if x.is_finite() && y.is_finite() {
            l1 += (x - y).abs();
        } else {
            masked += 1;
        }
    }
    let box_mass = (discrete_ddc(a)?.signed_total - discrete_ddc(b)?.signed_total).abs();
    Ok(GapReport {
        l1: l1 * h2,
        box_mass,
        masked,
    })
}

/// Distance between `L` and `L_n^0` on the grid.
pub fn equidist_gap(slice: &Slice, n: u32, grid: &ComplexGrid) -> Result<GapReport> {
    let l = field_eval(slice, n, FieldKind::L, grid);
    let ln0 = field_eval(slice, n, FieldKind::Ln0, grid);
    field_gap(&l, &ln0)
}

/// The two sides of the `theta`-average identity on `region`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMass {
    /// Mass of `dd^c L_n` in the region.
    pub ddc_mass: f64,
    /// `K`-point average of `2^-n #{roots of p_n(., e^{i theta}) in region}`.
    pub theta_mass: f64,
    /// `|average over K - average over the K/2 even nodes|`.
    pub quadrature: f64,
    pub masked: usize,
}

pub fn theta_average_mass(slice: &Slice, n: u32, k: usize, region: &Region, grid: &ComplexGrid) -> Result<ThetaMass> {
    if k < 16 || k % 2 != 0 {
        return Err(Error::InvalidInput(format!("theta sample count {k} must be even and >= 16")));
    }
    let field = field_eval(slice, n, FieldKind::Ln, grid);
    let ddc = discrete_ddc(&field)?;
    let expected = slice.is_polynomial_line().then(|| n2(n));
    let counts: Vec<usize> = (0..k)
        .into_par_iter()
        .map(|j| {
            // midpoint nodes: w = 1 puts the roots on parabolic parameters
            let w = Complex64::from_polar(1.0, TAU * (j as f64 + 0.5) / k as f64);
            let roots = slice_roots(slice, n, w, expected)?;
            Ok(roots.params.iter().filter(|t| region.contains(**t)).count())
        })
        .collect::<Result<_>>()?;
    let scale = 2f64.powi(-(n as i32));
    let all = counts.iter().sum::<usize>() as f64 / k as f64 * scale;
    let half = counts.iter().step_by(2).sum::<usize>() as f64 / (k / 2) as f64 * scale;
    Ok(ThetaMass {
        ddc_mass: ddc.signed_mass_in(region),
        theta_mass: all,
        quadrature: (all - half).abs(),
        masked: field.masked_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn log_field(h: f64, a: Complex64) -> ScalarField {
        let n = (2.0 / h).round() as usize + 1;
        let grid = ComplexGrid::new(c(-1.0, -1.0), h, n, n).unwrap();
        ScalarField::from_fn(grid, |z| Some((z - a).norm().ln()))
    }

    #[test]
    fn unit_mass_of_log() {
        let a = c(0.0031, -0.0047);
        let mut last = f64::INFINITY;
        for h in [0.02, 0.01, 0.005] {
            let d = discrete_ddc(&log_field(h, a)).unwrap();
            let err = (d.signed_total - 1.0).abs();
            assert!(err <= 2.0 * h, "h={h} err={err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn harmonic_field_has_no_mass() {
        let grid = ComplexGrid::new(c(-1.0, -1.0), 0.02, 101, 101).unwrap();
        let f = ScalarField::from_fn(grid, |z| Some((z * z).re));
        assert!(discrete_ddc(&f).unwrap().signed_total.abs() < 1e-8);
    }

    #[test]
    fn two_logs() {
        let h = 0.01;
        let grid = ComplexGrid::new(c(-1.0, -1.0), h, 201, 201).unwrap();
        let f = ScalarField::from_fn(grid, |z| Some((z - c(0.3, 0.1)).norm().ln() + (z + c(0.2, 0.4)).norm().ln()));
        let m = discrete_ddc(&f).unwrap().signed_total;
        assert!((m - 2.0).abs() < 4.0 * h);
    }

    #[test]
    fn potentials() {
        let m = DiscreteMeasure::new(vec![(c(0.0, 0.0), 1.0)]).unwrap();
        assert!((m.potential(c(std::f64::consts::E, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        let m = DiscreteMeasure::new(vec![(c(1.0, 0.0), 0.5), (c(-1.0, 0.0), 0.5)]).unwrap();
        assert_eq!(m.potential(c(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(m.potential(c(1.0, 0.0)).unwrap_err().kind(), "AtomCollision");
    }

    #[test]
    fn csv_round_trip() {
        let grid = ComplexGrid::new(c(-0.5, 0.25), 0.125, 4, 3).unwrap();
        let f = ScalarField::from_fn(grid, |z| (z.re > 0.0).then(|| z.im / 3.0));
        let text = f.to_csv();
        assert!(text.starts_with("# origin_re origin_im h nx ny\n# -0.5 0.25 0.125 4 3\n"));
        assert!(text.contains("-inf"));
        let back = ScalarField::from_csv(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn too_many_masked() {
        let grid = ComplexGrid::new(c(0.0, 0.0), 0.1, 5, 5).unwrap();
        let f = ScalarField::from_fn(grid, |z| (z.re > 0.25).then_some(1.0));
        assert_eq!(discrete_ddc(&f).unwrap_err().kind(), "TooManyMasked");
    }

    #[test]
    fn polynomial_ln0_matches_family() {
        let slice = Slice::polynomial_line();
        for t in [c(0.1, 0.2), c(-0.9, 0.1), c(0.3, -0.6)] {
            for n in [2, 3, 4, 6] {
                let fast = polynomial_ln0(t, n).unwrap();
                let slow = family_ln0(&slice.at(t), n).unwrap().value;
                assert!((fast - slow).abs() < 1e-9, "t={t} n={n}: {fast} vs {slow}");
            }
        }
    }
}
