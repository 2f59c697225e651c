//! The moduli space of quadratic rational maps in Milnor coordinates
//! `(sigma1, sigma2)`, the symmetric functions of the fixed-point
//! multipliers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyroot::{aberth, roots, newton_polygon_guesses, AberthOptions, CPoly};
use crate::ratmap::RationalMap;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Point `(lambda1, lambda2) = (sigma1, sigma2)` of the moduli space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint {
    pub l1: Complex64,
    pub l2: Complex64,
}

impl ModuliPoint {
    pub fn new(l1: Complex64, l2: Complex64) -> Self {
        ModuliPoint { l1, l2 }
    }

    /// Moduli point of `z^2 + c`, i.e. `(2, 4c)`.
    pub fn quadratic_polynomial(c: Complex64) -> Self {
        ModuliPoint::new(Complex64::new(2.0, 0.0), 4.0 * c)
    }

    /// `sigma3 = sigma1 - 2` by the holomorphic index formula.
    pub fn sigma3(&self) -> Complex64 {
        self.l1 - 2.0
    }

    pub fn distance(&self, other: &ModuliPoint) -> f64 {
        ((self.l1 - other.l1).norm_sqr() + (self.l2 - other.l2).norm_sqr()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.l1.is_finite() && self.l2.is_finite()
    }

    /// `X^3 - sigma1 X^2 + sigma2 X - sigma3`.
    pub fn fixed_point_polynomial(&self) -> CPoly {
        CPoly::new(vec![-self.sigma3(), self.l2, -self.l1, ONE])
    }

    /// The three fixed-point multipliers. Near-coincident roots are
    /// replaced by their centroid, which is accurate where the individual
    /// roots of a multiple root are not.
    pub fn fixed_multipliers(&self) -> Result<[Complex64; 3]> {
        let clusters = roots(&self.fixed_point_polynomial(), 1e-9)?;
        let r: Vec<Complex64> = clusters
            .iter()
            .flat_map(|c| std::iter::repeat(c.value).take(c.multiplicity))
            .collect();
        Ok([r[0], r[1], r[2]])
    }
}

/// `p_n(lambda, .)`: monic polynomial whose roots are the multipliers of
/// the exact period-`n` cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPoly {
    pub period: u32,
    pub poly: CPoly,
    pub roots: Vec<Complex64>,
}

impl MultiplierPoly {
    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    /// `prod (w - w_j)`, evaluated from the roots.
    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.roots.iter().fold(ONE, |acc, r| acc * (w - r))
    }

    /// `sum ln|w - w_j|`, free of overflow.
    pub fn log_abs(&self, w: Complex64) -> f64 {
        self.roots.iter().map(|r| (w - r).norm().ln()).sum()
    }

    pub fn roots_in_disc(&self) -> Vec<Complex64> {
        self.roots.iter().copied().filter(|r| r.norm() < 1.0).collect()
    }
}

/// `nu2(n)` and `N2(n) = nu2(n) / 2` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub nu: Vec<u64>,
    pub components: Vec<u64>,
}

impl CountTable {
    /// `N2(n)`, 1-based.
    pub fn n2(&self, n: u32) -> u64 {
        self.components[n as usize - 1]
    }

    pub fn nu2(&self, n: u32) -> u64 {
        self.nu[n as usize - 1]
    }
}

/// `nu2(1) = 2`, `2^n = sum_{k | n} nu2(k)`.
pub fn count_table(n_max: u32) -> CountTable {
    let mut nu: Vec<u64> = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let lower: u64 = (1..n).filter(|k| n % k == 0).map(|k| nu[k as usize - 1]).sum();
        nu.push((1u64 << n) - lower);
    }
    let components = nu.iter().map(|v| v / 2).collect();
    CountTable { nu, components }
}

/// `N2(n)`: the number of hyperbolic components of period `n` of the
/// Mandelbrot set.
pub fn n2(n: u32) -> usize {
    count_table(n).n2(n) as usize
}

fn sort_key(z: &Complex64) -> (f64, f64) {
    (z.norm(), z.arg())
}

/// Representative `z(z + mu1)/(mu2 z + 1)` fixing 0 (multiplier `mu1`) and
/// infinity (multiplier `mu2`).
pub fn normal_form(lambda: &ModuliPoint) -> Result<RationalMap> {
    if !lambda.is_finite() {
        return Err(Error::InvalidInput("moduli point is not finite".into()));
    }
    let mut mu = lambda.fixed_multipliers()?;
    mu.sort_by(|a, b| sort_key(a).partial_cmp(&sort_key(b)).unwrap());
    // the resultant of the normal form is 1 - mu1 mu2: take the pairing
    // farthest from degenerate, earliest on ties
    let pairing = [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .map(|(i, j)| ((i, j), (mu[i] * mu[j] - ONE).norm()))
        .filter(|&(_, gap)| gap > 1e-10)
        .fold(None, |best: Option<((usize, usize), f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .map(|(p, _)| p);
    let Some((i, j)) = pairing else {
        return Err(Error::DegenerateModuli { multipliers: mu });
    };
    let num = CPoly::new(vec![ZERO, mu[i], ONE]);
    let den = CPoly::new(vec![ONE, mu[j]]);
    RationalMap::new(num, den)
}

/// Milnor coordinates of a quadratic map, with the index residual
/// `sigma3 - sigma1 + 2`.
pub fn coords_with_residual(f: &RationalMap) -> Result<(ModuliPoint, Complex64)> {
    if f.degree() != 2 {
        return Err(Error::InvalidInput(format!("degree {} map has no Milnor coordinates", f.degree())));
    }
    let pts = f.periodic_points(1)?;
    let m: Vec<Complex64> = pts.iter().map(|p| p.multiplier).collect();
    let s1 = m[0] + m[1] + m[2];
    let s2 = m[0] * m[1] + m[0] * m[2] + m[1] * m[2];
    let s3 = m[0] * m[1] * m[2];
    Ok((ModuliPoint::new(s1, s2), s3 - s1 + 2.0))
}

pub fn coords(f: &RationalMap) -> Result<ModuliPoint> {
    coords_with_residual(f).map(|(p, _)| p)
}

/// `p_n(lambda, .)`. For `n = 1` this is the fixed-point cubic; otherwise
/// it is assembled from the exact cycles of the normal form.
pub fn pn(lambda: &ModuliPoint, n: u32) -> Result<MultiplierPoly> {
    if n == 0 {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    if n == 1 {
        let poly = lambda.fixed_point_polynomial();
        let roots = lambda.fixed_multipliers()?.to_vec();
        return Ok(MultiplierPoly { period: 1, poly, roots });
    }
    let f = normal_form(lambda)?;
    let roots = f.exact_cycles(n)?.multipliers();
    Ok(MultiplierPoly {
        period: n,
        poly: CPoly::from_roots(&roots),
        roots,
    })
}

/// Coefficients `(a, b, c)` of `Per_1(w) = {a l1 + b l2 + c = 0}`.
pub fn per1_line(w: Complex64) -> (Complex64, Complex64, Complex64) {
    (w * w + 1.0, -w, -(w * w * w + 2.0))
}

/// `phi_{n,m}(lambda)`: the unique in-disc roots of `p_n` and `p_m`.
pub fn multiplier_pair(lambda: &ModuliPoint, n: u32, m: u32) -> Result<(Complex64, Complex64)> {
    if n == m {
        return Err(Error::InvalidInput("multiplier pair needs n != m".into()));
    }
    let a = pn(lambda, n)?.roots_in_disc();
    let b = pn(lambda, m)?.roots_in_disc();
    if a.len() != 1 || b.len() != 1 {
        return Err(Error::NotInComponent {
            count_n: a.len(),
            count_m: b.len(),
        });
    }
    Ok((a[0], b[0]))
}

/// Affine complex line `t -> base + t dir` in the moduli space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub base: ModuliPoint,
    pub dir: ModuliPoint,
}

impl Slice {
    pub fn new(base: ModuliPoint, dir: ModuliPoint) -> Self {
        Slice { base, dir }
    }

    /// The line of quadratic polynomials `z^2 + t`.
    pub fn polynomial_line() -> Self {
        Slice::new(
            ModuliPoint::new(Complex64::new(2.0, 0.0), ZERO),
            ModuliPoint::new(ZERO, Complex64::new(4.0, 0.0)),
        )
    }

    /// `Per_1(eta)`, parametrized so that `eta = 0` gives `(2, s)`.
    pub fn per1(eta: Complex64) -> Self {
        let e2 = eta * eta + 1.0;
        Slice::new(
            ModuliPoint::new((eta * eta * eta + 2.0) / e2, ZERO),
            ModuliPoint::new(eta, e2),
        )
    }

    pub fn at(&self, t: Complex64) -> ModuliPoint {
        ModuliPoint::new(self.base.l1 + t * self.dir.l1, self.base.l2 + t * self.dir.l2)
    }

    pub fn is_polynomial_line(&self) -> bool {
        *self == Slice::polynomial_line()
    }
}

/// Roots of `t -> p_n(slice(t), w)` with their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRoots {
    pub params: Vec<Complex64>,
    pub points: Vec<ModuliPoint>,
    pub residuals: Vec<f64>,
}

/// Samples `g(t) = p_n(slice(t), w)` on a circle, recovers its coefficients
/// by a discrete Fourier transform and returns the roots of the
/// interpolant, polished against `g` itself.
///
/// With `expected = Some(k)` the effective degree must be `k`, otherwise
/// `CountMismatch`; with `None` the effective degree is accepted as found.
pub fn slice_roots(slice: &Slice, n: u32, w: Complex64, expected: Option<usize>) -> Result<SliceRoots> {
    let g = |t: Complex64| -> Result<Complex64> { Ok(pn(&slice.at(t), n)?.eval(w)) };
    let bound = expected.unwrap_or(n2(n).max(1) * 2);
    let mut samples = (2 * (bound + 1)).next_power_of_two().max(16);
    let mut radius = 10.0;
    let mut failure = None;
    let mut previous = None;
    let mut attempt: Option<Refined> = None;
    for _ in 0..12 {
        let coeffs = match interpolate(&g, samples, radius) {
            Ok(c) => c,
            Err(e) => {
                // the circle runs along a degenerate parameter
                radius *= 1.13;
                failure = Some(e);
                continue;
            }
        };
        let scale = coeffs.iter().enumerate().map(|(k, c)| c.norm() * radius.powi(k as i32)).fold(0.0, f64::max);
        let effective = coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(k, c)| c.norm() * radius.powi(*k as i32) > 1e-9 * scale)
            .map_or(0, |(k, _)| k);
        if effective + 2 > samples / 2 {
            samples *= 2;
            continue;
        }
        let poly = CPoly::new(coeffs[..=effective].to_vec());
        if poly.degree() == 0 {
            let none = Refined { params: Vec::new(), residuals: Vec::new() };
            return finish_count(expected, none, slice);
        }
        let guesses = newton_polygon_guesses(&poly);
        // the interpolant is only a proxy for g: a capped run still gives
        // usable starting points for the refinement below
        let found = match aberth(&poly, guesses, AberthOptions::default()) {
            Ok(run) => run.roots,
            Err(Error::NonConvergence { best, .. }) => best,
            Err(e) => return Err(Error::RootFindingFailed(Box::new(e))),
        };
        let outside = found.iter().any(|r| r.norm() > 0.7 * radius);
        // roots beyond the circle are still trusted once two radii agree
        let stable = previous.as_ref().is_some_and(|p: &Vec<Complex64>| {
            p.len() == found.len()
                && found.iter().all(|r| p.iter().any(|q| (r - q).norm() <= 1e-6 * (1.0 + r.norm())))
        });
        let refined = refine(&g, &found, &coeffs[..=effective], scale);
        if outside && !stable {
            // far roots refined to a small backward error are kept as they
            // are: larger circles run into degenerate maps
            if refined.accepted() {
                return finish_count(expected, refined, slice);
            }
            let rank = |a: &Refined| (expected.is_some_and(|k| k != a.params.len()), a.worst());
            if attempt.as_ref().map_or(true, |a| rank(&refined) < rank(a)) {
                attempt = Some(refined);
            }
            radius *= 2.0;
            previous = Some(found);
            continue;
        }
        return finish_count(expected, refined, slice);
    }
    // report the best refined root set when the circles ran out
    match (attempt, failure) {
        (Some(r), _) => Err(Error::CountMismatch {
            found: r.params.len(),
            expected: expected.unwrap_or(r.params.len()),
            residuals: r.residuals,
        }),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::CountMismatch {
            found: 0,
            expected: expected.unwrap_or(0),
            residuals: Vec::new(),
        }),
    }
}

fn finish_count(expected: Option<usize>, refined: Refined, slice: &Slice) -> Result<SliceRoots> {
    let ok = refined.accepted();
    let Refined { params, residuals, .. } = refined;
    if expected.is_some_and(|k| k != params.len()) || !ok {
        return Err(Error::CountMismatch {
            found: params.len(),
            expected: expected.unwrap_or(params.len()),
            residuals,
        });
    }
    Ok(SliceRoots {
        points: params.iter().map(|&t| slice.at(t)).collect(),
        params,
        residuals,
    })
}

/// Coefficients of the degree `< samples` interpolant of `g` on `|t| = radius`.
/// A node where `g` fails moves the whole node set by a fraction of a step.
fn interpolate<G>(g: &G, samples: usize, radius: f64) -> Result<Vec<Complex64>>
where
    G: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let mut last = None;
    for phase in NODE_PHASES {
        match interpolate_at(g, samples, radius, phase) {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one phase"))
}

// small phases keep nodes off the real axis, where the polynomial line has
// its parabolic parameters
const NODE_PHASES: [f64; 3] = [0.137, 0.389, 0.713];

fn interpolate_at<G>(g: &G, samples: usize, radius: f64, phase: f64) -> Result<Vec<Complex64>>
where
    G: Fn(Complex64) -> Result<Complex64> + Sync,
{
    use rayon::prelude::*;
    let values: Vec<Complex64> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let t = Complex64::from_polar(radius, TAU * (j as f64 + phase) / samples as f64);
            g(t)
        })
        .collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity(samples);
    for k in 0..samples {
        let mut acc = ZERO;
        for (j, v) in values.iter().enumerate() {
            let angle = -TAU * (k as f64) * (j as f64 + phase) / samples as f64;
            acc += v * Complex64::from_polar(1.0, angle);
        }
        coeffs.push(acc / (samples as f64 * radius.powi(k as i32)));
    }
    Ok(coeffs)
}

/// Roots refined against `g`, with `|g|` relative to the larger of
/// `scale` and the size of the interpolant's terms at the root.
struct Refined {
    params: Vec<Complex64>,
    residuals: Vec<f64>,
}

impl Refined {
    fn worst(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    fn accepted(&self) -> bool {
        self.residuals.iter().all(|r| *r < 1e-6)
    }
}

fn refine<G>(g: &G, found: &[Complex64], coeffs: &[Complex64], scale: f64) -> Refined
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut out = Refined {
        params: Vec::with_capacity(found.len()),
        residuals: Vec::with_capacity(found.len()),
    };
    for &t0 in found {
        // a start where g cannot be evaluated stays as an unresolved root
        let Ok((t, res)) = newton_fd(g, t0, scale) else {
            out.params.push(t0);
            out.residuals.push(f64::INFINITY);
            continue;
        };
        let local = coeffs.iter().enumerate().map(|(k, c)| c.norm() * t.norm().powi(k as i32)).fold(scale, f64::max);
        out.params.push(t);
        out.residuals.push(res * scale / local);
    }
    out
}

/// Secant-free Newton with a central-difference derivative; returns the
/// refined root and `|g|` relative to `scale`.
fn newton_fd<G>(g: &G, mut t: Complex64, scale: f64) -> Result<(Complex64, f64)>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let mut val = g(t)?;
    for _ in 0..8 {
        let h = 1e-6 * (1.0 + t.norm());
        let (Ok(a), Ok(b)) = (g(t + h), g(t - h)) else {
            break;
        };
        let d = (a - b) / (2.0 * h);
        if d.norm() == 0.0 {
            break;
        }
        let next = t - val / d;
        let Ok(next_val) = g(next) else {
            break;
        };
        if next_val.norm() >= val.norm() {
            break;
        }
        t = next;
        val = next_val;
        if val.norm() <= 1e-15 * scale {
            break;
        }
    }
    Ok((t, val.norm() / scale.max(f64::MIN_POSITIVE)))
}

/// `Per_n(w) ∩ Per_1(eta)`.
pub fn per_curve_samples(n: u32, w: Complex64, eta: Complex64) -> Result<Vec<ModuliPoint>> {
    if !(w.norm() < 1.0 && eta.norm() < 1.0) {
        return Err(Error::InvalidInput("w and eta must lie in the unit disc".into()));
    }
    Ok(slice_roots(&Slice::per1(eta), n, w, Some(n2(n)))?.points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn count_table_values() {
        let t = count_table(10);
        assert_eq!(t.components, vec![1, 1, 3, 6, 15, 27, 63, 120, 252, 495]);
        assert_eq!(t.nu[..4], [2, 2, 6, 12]);
    }

    #[test]
    fn normal_form_of_square_and_basilica() {
        let f = normal_form(&ModuliPoint::new(c(2.0, 0.0), ZERO)).unwrap();
        let z = c(0.3, -0.4);
        let img = f.apply(&crate::SpherePoint::affine(z)).to_affine().unwrap();
        assert!((img - z * z).norm() < 1e-15);

        let basilica = ModuliPoint::quadratic_polynomial(c(-1.0, 0.0));
        assert_eq!(basilica, ModuliPoint::new(c(2.0, 0.0), c(-4.0, 0.0)));
        let g = normal_form(&basilica).unwrap();
        let back = coords(&g).unwrap();
        assert!(back.distance(&basilica) < 1e-9);
    }

    #[test]
    fn triple_degeneracy() {
        // mu = 1, 1, 1: sigma1 = 3, sigma2 = 3, sigma3 = 1 = sigma1 - 2
        let err = normal_form(&ModuliPoint::new(c(3.0, 0.0), c(3.0, 0.0))).unwrap_err();
        assert_eq!(err.kind(), "DegenerateModuli");
    }

    #[test]
    fn pn_examples() {
        let sq = ModuliPoint::new(c(2.0, 0.0), ZERO);
        let p1 = pn(&sq, 1).unwrap();
        assert_eq!(p1.poly.coeffs(), &[ZERO, ZERO, c(-2.0, 0.0), ONE]);
        let p2 = pn(&sq, 2).unwrap();
        assert_eq!(p2.degree(), 1);
        assert!((p2.roots[0] - 4.0).norm() < 1e-10);
        let p2b = pn(&ModuliPoint::new(c(2.0, 0.0), c(-4.0, 0.0)), 2).unwrap();
        assert!(p2b.roots[0].norm() < 1e-10);
    }

    #[test]
    fn per1_line_values() {
        assert_eq!(per1_line(ZERO), (ONE, ZERO, c(-2.0, 0.0)));
        assert_eq!(per1_line(ONE), (c(2.0, 0.0), -ONE, c(-3.0, 0.0)));
    }

    #[test]
    fn multiplier_pairs() {
        let basilica = ModuliPoint::new(c(2.0, 0.0), c(-4.0, 0.0));
        let (a, b) = multiplier_pair(&basilica, 1, 2).unwrap();
        assert!(a.norm() < 1e-10 && b.norm() < 1e-10);
        let err = multiplier_pair(&ModuliPoint::new(c(2.0, 0.0), ZERO), 1, 2).unwrap_err();
        assert!(matches!(err, Error::NotInComponent { count_n: 2, count_m: 0 }));
    }

    #[test]
    fn per_curve_basilica_and_period_three() {
        let pts = per_curve_samples(2, ZERO, ZERO).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].distance(&ModuliPoint::new(c(2.0, 0.0), c(-4.0, 0.0))) < 1e-8);

        let pts = per_curve_samples(3, ZERO, ZERO).unwrap();
        assert_eq!(pts.len(), 3);
        for p in pts {
            let cc = p.l2 / 4.0;
            assert!((p.l1 - 2.0).norm() < 1e-12);
            assert!((cc * cc * cc + 2.0 * cc * cc + cc + 1.0).norm() < 1e-8);
        }
    }
}
