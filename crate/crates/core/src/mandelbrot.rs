//! The quadratic polynomial line: centers of hyperbolic components, the
//! Green function of the Mandelbrot set and the Levin equidistribution gap.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::currents::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::moduli2::n2;
use crate::polyroot::{aberth, cdiv, circle_guesses, polish, AberthOptions, CPoly, Correction, NewtonRatio};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `|z| > 4` certifies escape for every `|c| <= 4`.
pub const ESCAPE_RADIUS: f64 = 4.0;
/// Largest supported period (`deg P_14 = 2^13`).
pub const MAX_CENTER_PERIOD: u32 = 14;

/// Centers of the hyperbolic components of exact period `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    pub period: u32,
    /// Coefficients of `Q_n`, or `None` once they leave the `f64` range.
    pub poly: Option<CPoly>,
    pub centers: Vec<Complex64>,
}

impl CenterSet {
    pub fn count(&self) -> usize {
        self.centers.len()
    }
}

/// `P_n(c) = p_c^n(0)` and its derivative, with the ratio `P_n / P_n'` once
/// the orbit is large enough that the values themselves would overflow.
fn center_ratio(c: Complex64, n: u32) -> Option<Complex64> {
    let mut z = c;
    let mut dz = ONE;
    let mut halvings = 0;
    for _ in 1..n {
        if z.norm() > 1e100 {
            // z -> z^2 dominates: the ratio halves per step
            halvings += 1;
            continue;
        }
        dz = 2.0 * z * dz + ONE;
        z = z * z + c;
    }
    if z == ZERO {
        return Some(ZERO);
    }
    let r = cdiv(z, dz) / 2f64.powi(halvings);
    r.is_finite().then_some(r)
}

/// `P_n(c)` by the recursion, without overflow protection.
pub fn critical_orbit_value(c: Complex64, n: u32) -> Complex64 {
    let mut z = c;
    for _ in 1..n {
        z = z * z + c;
    }
    z
}

/// `P_n` symbolically; only usable for small `n`.
pub fn pn_polynomial(n: u32) -> CPoly {
    let c = CPoly::new(vec![ZERO, ONE]);
    let mut p = c.clone();
    for _ in 1..n {
        p = &(&p * &p) + &c;
    }
    p
}

/// Newton ratio of `Q_n = P_n / prod_{lower} (c - c_j)`.
struct Deflated<'a> {
    n: u32,
    degree: usize,
    lower: &'a [Complex64],
}

impl NewtonRatio for Deflated<'_> {
    fn degree(&self) -> usize {
        self.degree
    }

    fn correction(&self, c: Complex64) -> Correction {
        let Some(r) = center_ratio(c, self.n) else {
            return Correction::Undefined;
        };
        if r == ZERO {
            return if self.lower.iter().any(|&l| l == c) {
                Correction::Undefined
            } else {
                Correction::Root
            };
        }
        let mut logd = cdiv(ONE, r);
        for &l in self.lower {
            let d = c - l;
            if d == ZERO {
                return Correction::Undefined;
            }
            logd -= cdiv(ONE, d);
        }
        if logd == ZERO || !logd.is_finite() {
            Correction::Undefined
        } else {
            Correction::Step(cdiv(ONE, logd))
        }
    }
}

/// Centers of exact period `n`: roots of `P_n` with the centers of every
/// proper divisor period deflated out.
pub fn center_poly(n: u32) -> Result<CenterSet> {
    if n == 0 || n > MAX_CENTER_PERIOD {
        return Err(Error::InvalidInput(format!("period {n} outside 1..={MAX_CENTER_PERIOD}")));
    }
    let mut lower = Vec::new();
    for k in (1..n).filter(|k| n % k == 0) {
        lower.extend(center_poly(k)?.centers);
    }
    let expected = n2(n);
    let source = Deflated {
        n,
        degree: expected,
        lower: &lower,
    };
    let guesses = circle_guesses(expected, Complex64::new(-0.5, 0.0), 1.7);
    let opts = AberthOptions {
        max_iterations: 3000,
        ..AberthOptions::default()
    };
    let run = aberth(&source, guesses, opts).map_err(|e| Error::RootFindingFailed(Box::new(e)))?;
    let centers: Vec<Complex64> = run.roots.into_iter().map(|c| polish(&source, c, 3)).collect();

    let valid = centers.iter().enumerate().filter(|&(i, c)| {
        let step_ok = center_ratio(*c, n).is_some_and(|r| r.norm() < 1e-10 * (1.0 + c.norm()));
        let exact = (1..n)
            .filter(|k| n % k == 0)
            .all(|k| critical_orbit_value(*c, k).norm() > 1e-6);
        let distinct = centers[..i].iter().all(|o| (o - c).norm() > 1e-8);
        step_ok && exact && distinct
    });
    let found = valid.count();
    if found != expected {
        return Err(Error::DeflationMismatch { found, expected });
    }
    let poly = CPoly::from_roots(&centers);
    Ok(CenterSet {
        period: n,
        poly: poly.is_finite().then_some(poly),
        centers,
    })
}

/// All roots of `P_n`: the centers of every period dividing `n`.
pub fn pn_roots(n: u32) -> Result<Vec<Complex64>> {
    let mut all = Vec::with_capacity(1 << (n - 1));
    for k in (1..=n).filter(|k| n % k == 0) {
        all.extend(center_poly(k)?.centers);
    }
    Ok(all)
}

/// `G_M(c) = G_c(c)`, the escape rate of the critical value. Zero when the
/// orbit stays within the escape radius for `iters` steps.
pub fn green_m(c: Complex64, iters: u32) -> f64 {
    let mut z = c;
    let mut weight = 1.0;
    for _ in 0..iters {
        if z.norm() > ESCAPE_RADIUS {
            // keep iterating until c is negligible against z^2
            while z.norm() < 1e100 {
                z = z * z + c;
                weight *= 0.5;
            }
            return weight * z.norm().ln();
        }
        z = z * z + c;
        weight *= 0.5;
    }
    0.0
}

/// Maximum over `test_points` of `|U_rho(z) - G_M(z)|` where `rho` is the
/// probability measure on the roots of `P_n`.
pub fn levin_gap(n: u32, test_points: &[Complex64]) -> Result<f64> {
    potential_gap(&center_measure(n)?, test_points)
}

/// Maximum over `test_points` of `|U_rho(z) - G_M(z)|`.
pub fn potential_gap(measure: &DiscreteMeasure, test_points: &[Complex64]) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for &z in test_points {
        let g = green_m(z, 200);
        if !(g > 0.05) {
            return Err(Error::InvalidInput(format!("test point {z} is too close to the Mandelbrot set")));
        }
        gap = gap.max((measure.potential(z)? - g).abs());
    }
    Ok(gap)
}

/// `(1 / deg P_n) sum_{P_n(c) = 0} delta_c`.
pub fn center_measure(n: u32) -> Result<DiscreteMeasure> {
    let roots = pn_roots(n)?;
    let w = 1.0 / roots.len() as f64;
    DiscreteMeasure::new(roots.into_iter().map(|c| (c, w)).collect())
}
