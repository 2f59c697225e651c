//! Estimators of the Lyapunov exponent of a rational map with respect to
//! its measure of maximal entropy, and the multiplier approximants
//! `L_n^0`, `L_n` on the quadratic moduli space.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mandelbrot::green_m;
use crate::moduli2::{pn, ModuliPoint};
use crate::polyroot::{aberth, newton_polygon_guesses, AberthOptions, CPoly};
use crate::ratmap::{CycleSpectrum, PeriodicPoint, RationalMap, SpherePoint, Stability, PARABOLIC_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cycles,
    GreenCritical,
    MonteCarlo,
    FamilyLn0,
    FamilyLn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cycles => "cycles",
            Method::GreenCritical => "green-critical",
            Method::MonteCarlo => "monte-carlo",
            Method::FamilyLn0 => "family-Ln0",
            Method::FamilyLn => "family-Ln",
        }
    }
}

/// A Lyapunov exponent estimate in nats.
///
/// `order` is the period `n` or the sample count. `error` is an error
/// indicator (standard error for Monte Carlo, a truncation estimate
/// otherwise). `value` is `-inf` exactly when `minus_infinity` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapEstimate {
    pub value: f64,
    pub method: Method,
    pub order: u64,
    pub error: f64,
    pub minus_infinity: bool,
}

impl LyapEstimate {
    fn finite(value: f64, method: Method, order: u64, error: f64) -> Self {
        LyapEstimate {
            value,
            method,
            order,
            error,
            minus_infinity: false,
        }
    }
}

/// `d^-n sum (1/n) ln|(f^n)'(z)|` over repelling fixed points `z` of `f^n`,
/// either of exact period `n` or of every period dividing `n`.
pub fn lyap_cycles(f: &RationalMap, n: u32, exact_period_only: bool) -> Result<LyapEstimate> {
    if exact_period_only {
        Ok(lyap_from_spectrum(f.degree(), &f.exact_cycles(n)?))
    } else {
        lyap_from_points(f.degree(), n, &f.periodic_points(n)?)
    }
}

/// The exact-period cycles estimate from a computed spectrum.
pub fn lyap_from_spectrum(degree: usize, spectrum: &CycleSpectrum) -> LyapEstimate {
    // each of the n points of a cycle contributes ln|w| / n
    let logs = spectrum.cycles.iter().map(|c| (c.multiplier.norm().ln(), c.stability));
    finish_cycles(degree, spectrum.period, split_repelling(logs))
}

/// The dividing-period cycles estimate from all fixed points of `f^n`.
pub fn lyap_from_points(degree: usize, n: u32, points: &[PeriodicPoint]) -> Result<LyapEstimate> {
    let parabolic: Vec<Complex64> = points
        .iter()
        .filter(|p| (p.multiplier - ONE).norm() < PARABOLIC_TOL)
        .map(|p| p.point.to_complex_or_inf())
        .collect();
    if !parabolic.is_empty() {
        return Err(Error::AmbiguousPeriod { points: parabolic });
    }
    let logs = points
        .iter()
        .map(|p| (p.multiplier.norm().ln() / n as f64, Stability::of(p.multiplier)));
    Ok(finish_cycles(degree, n, split_repelling(logs)))
}

fn finish_cycles(degree: usize, n: u32, (repelling, excluded): (Vec<f64>, Vec<f64>)) -> LyapEstimate {
    let d = degree as f64;
    let weight = d.powi(-(n as i32));
    let value = weight * repelling.iter().sum::<f64>();
    let error = weight * (d.ln() + excluded.iter().map(|v| v.abs().min(d.ln() * n as f64)).sum::<f64>());
    LyapEstimate::finite(value, Method::Cycles, n as u64, error)
}

fn split_repelling(logs: impl Iterator<Item = (f64, Stability)>) -> (Vec<f64>, Vec<f64>) {
    let mut rep = Vec::new();
    let mut other = Vec::new();
    for (v, s) in logs {
        if s == Stability::Repelling {
            rep.push(v);
        } else {
            other.push(v);
        }
    }
    (rep, other)
}

/// `ln 2 + G_c(0)` for `z^2 + c`, with `G_c(0) = G_c(c) / 2`.
pub fn lyap_green_quadratic_poly(c: Complex64, iters: u32) -> LyapEstimate {
    let iters = iters.max(20);
    let g = green_m(c, iters);
    LyapEstimate::finite(
        std::f64::consts::LN_2 + 0.5 * g,
        Method::GreenCritical,
        iters as u64,
        // unresolved escape beyond `iters` steps
        2f64.powi(-(iters as i32)) * 4f64.ln(),
    )
}

const MAX_PULLBACK_FAILURES: usize = 100;
const SEED_POINT: Complex64 = Complex64::new(std::f64::consts::FRAC_1_PI, std::f64::consts::E / 10.0);

/// Monte Carlo average of `ln` of the spherical derivative over points drawn
/// by `depth` random inverse-branch pullbacks of a fixed point. Sample `i`
/// uses stream `i` of a ChaCha8 generator seeded with `seed`, so the result
/// does not depend on how the work is split over threads.
pub fn lyap_mc(f: &RationalMap, samples: usize, depth: usize, seed: u64) -> Result<LyapEstimate> {
    if samples < 2 || depth == 0 {
        return Err(Error::InvalidInput("need at least 2 samples and depth >= 1".into()));
    }
    let critical_values = critical_values(f)?;
    let start = SpherePoint::affine(SEED_POINT);
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut failures = 0;
            loop {
                match pull_back(f, start, depth, &critical_values, &mut rng) {
                    Some(x) => return Ok(log_spherical_derivative(f, &x)),
                    None => {
                        failures += 1;
                        if failures >= MAX_PULLBACK_FAILURES {
                            return Err(Error::CriticalPullback { failures });
                        }
                    }
                }
            }
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LyapEstimate::finite(mean, Method::MonteCarlo, samples as u64, (var / n).sqrt()))
}

fn pull_back(
    f: &RationalMap,
    start: SpherePoint,
    depth: usize,
    critical_values: &[SpherePoint],
    rng: &mut ChaCha8Rng,
) -> Option<SpherePoint> {
    let mut x = start;
    for _ in 0..depth {
        if critical_values.iter().any(|v| v.chordal(&x) < 1e-12) {
            return None;
        }
        let pre = preimages(f, &x)?;
        x = pre[rng.gen_range(0..pre.len())];
    }
    Some(x)
}

/// The `d` preimages of `w = (a : b)`: roots of `b P - a Q`, with infinity
/// filling any drop in degree.
pub fn preimages(f: &RationalMap, w: &SpherePoint) -> Option<Vec<SpherePoint>> {
    let (a, b) = w.homogeneous();
    let lift = f.lift();
    let form: Vec<Complex64> = lift.p().iter().zip(lift.q()).map(|(p, q)| b * p - a * q).collect();
    let d = form.len() - 1;
    let poly = CPoly::new(form);
    let mut out = Vec::with_capacity(d);
    if poly.degree() > 0 {
        let roots = if poly.degree() == 2 {
            quadratic_roots(&poly)
        } else {
            aberth(&poly, newton_polygon_guesses(&poly), AberthOptions::default()).ok()?.roots
        };
        out.extend(roots.into_iter().map(SpherePoint::affine));
    } else if poly.is_zero() {
        return None;
    }
    out.resize(d, SpherePoint::INFINITY);
    Some(out)
}

/// Roots of a degree-2 polynomial without cancellation.
fn quadratic_roots(p: &CPoly) -> Vec<Complex64> {
    let [c, b, a] = [p.coeffs()[0], p.coeffs()[1], p.coeffs()[2]];
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 { -0.5 * (b + disc) } else { -0.5 * (b - disc) };
    if q == ZERO {
        return vec![ZERO, ZERO];
    }
    vec![q / a, c / q]
}

/// `ln( |det DF(x)| |x|^2 / (d |F(x)|^2) )` for a unit vector `x`.
pub fn log_spherical_derivative(f: &RationalMap, z: &SpherePoint) -> f64 {
    let (x, y) = z.homogeneous();
    let [p, q, px, py, qx, qy] = f.lift().apply_with_jacobian(x, y);
    let det = (px * qy - py * qx).norm();
    let image = p.norm_sqr() + q.norm_sqr();
    det.ln() - (f.degree() as f64).ln() - image.ln()
}

/// Images of the `2d - 2` critical points (zeros of the Jacobian
/// determinant of the lift).
pub fn critical_values(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    let lift = f.lift();
    let d = f.degree();
    let p = CPoly::new(lift.p().to_vec());
    let q = CPoly::new(lift.q().to_vec());
    // Wronskian P'Q - PQ' in the affine chart; missing degree means
    // critical points at infinity.
    let w = &(&p.derivative() * &q) - &(&p * &q.derivative());
    let mut pts: Vec<SpherePoint> = Vec::with_capacity(2 * d - 2);
    if w.degree() > 0 {
        let roots = aberth(&w, newton_polygon_guesses(&w), AberthOptions::default())
            .map_err(|e| Error::RootFindingFailed(Box::new(e)))?
            .roots;
        pts.extend(roots.into_iter().map(SpherePoint::affine));
    }
    pts.resize(2 * d - 2, SpherePoint::INFINITY);
    Ok(pts.iter().map(|c| f.apply(c)).collect())
}

const MULTIPLIER_ZERO: f64 = 1e-12;

/// `2^-n ln|p_n(lambda, 0)|`, or the minus-infinity flag on `Per_n(0)`.
pub fn family_ln0(lambda: &ModuliPoint, n: u32) -> Result<LyapEstimate> {
    let p = pn(lambda, n)?;
    let weight = 2f64.powi(-(n as i32));
    if p.roots.iter().any(|w| w.norm() < MULTIPLIER_ZERO) {
        return Ok(LyapEstimate {
            value: f64::NEG_INFINITY,
            method: Method::FamilyLn0,
            order: n as u64,
            error: 0.0,
            minus_infinity: true,
        });
    }
    let sum: f64 = p.roots.iter().map(|w| w.norm().ln()).sum();
    Ok(LyapEstimate::finite(weight * sum, Method::FamilyLn0, n as u64, 0.0))
}

/// `2^-n sum log+ |w_{n,j}(lambda)|`.
pub fn family_ln(lambda: &ModuliPoint, n: u32) -> Result<LyapEstimate> {
    let p = pn(lambda, n)?;
    let weight = 2f64.powi(-(n as i32));
    // summed in the same order as family_ln0 so the two agree bit for bit
    // when no multiplier lies in the unit disc
    let sum: f64 = p.roots.iter().map(|w| w.norm().ln().max(0.0)).sum();
    Ok(LyapEstimate::finite(weight * sum, Method::FamilyLn, n as u64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_map_cycles() {
        let f = RationalMap::power(2).unwrap();
        let div = lyap_cycles(&f, 10, false).unwrap();
        assert!((div.value - (1.0 - 2f64.powi(-10)) * LN_2).abs() < 1e-9);
        let exact = lyap_cycles(&f, 10, true).unwrap();
        assert!((exact.value - 990.0 / 1024.0 * LN_2).abs() < 1e-9);
    }

    #[test]
    fn green_critical_examples() {
        assert_eq!(lyap_green_quadratic_poly(ZERO, 50).value, LN_2);
        assert_eq!(lyap_green_quadratic_poly(c(-1.0, 0.0), 50).value, LN_2);
    }

    #[test]
    fn family_examples() {
        let sq = ModuliPoint::new(c(2.0, 0.0), ZERO);
        assert!(family_ln0(&sq, 1).unwrap().minus_infinity);
        assert!((family_ln0(&sq, 2).unwrap().value - 0.5 * LN_2).abs() < 1e-12);
        assert!((family_ln(&sq, 2).unwrap().value - 0.5 * LN_2).abs() < 1e-12);
        assert!((family_ln(&sq, 1).unwrap().value - 0.5 * LN_2).abs() < 1e-12);
        assert!((family_ln0(&sq, 10).unwrap().value - 990.0 / 1024.0 * LN_2).abs() < 1e-9);
    }

    #[test]
    fn spherical_derivative_of_square() {
        let f = RationalMap::power(2).unwrap();
        let z = c(0.7, 0.4);
        let n2 = z.norm_sqr();
        let expect = (2.0 * z.norm() * (1.0 + n2) / (1.0 + n2 * n2)).ln();
        assert!((log_spherical_derivative(&f, &SpherePoint::affine(z)) - expect).abs() < 1e-14);
    }

    #[test]
    fn preimages_of_square_map() {
        let f = RationalMap::quadratic(c(-1.0, 0.0));
        let w = SpherePoint::affine(c(0.5, 0.5));
        for p in preimages(&f, &w).unwrap() {
            assert!(f.apply(&p).chordal(&w) < 1e-14);
        }
    }
}
