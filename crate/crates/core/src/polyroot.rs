//! Complex univariate polynomials and simultaneous root finding.
//!
//! The root finder is Aberth–Ehrlich iteration driven by a [`NewtonRatio`]
//! source, so the same iteration serves coefficient polynomials (Horner) and
//! polynomials that are only available through point evaluation, such as the
//! numerator of `f^n(z) - z` or the Mandelbrot polynomial `p_c^n(0)`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest degree for which iterates are composed symbolically.
pub const SYMBOLIC_DEGREE_CAP: usize = 4096;

/// Polynomial with complex coefficients in ascending degree.
///
/// The leading coefficient is nonzero, except for the zero polynomial which
/// is stored as the single coefficient `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPoly {
    coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == ZERO {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        CPoly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c * z^k`.
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut coeffs = vec![ZERO; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    /// Monic polynomial `prod (z - r)`.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![ONE];
        for &r in roots {
            coeffs.push(ZERO);
            for k in (1..coeffs.len()).rev() {
                let lower = coeffs[k - 1];
                coeffs[k] = lower - r * coeffs[k];
            }
            coeffs[0] = -r * coeffs[0];
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> CPoly {
        if self.degree() == 0 {
            return CPoly::constant(ZERO);
        }
        CPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Polynomial with conjugated coefficients.
    pub fn conj(&self) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    pub fn pow(&self, k: usize) -> CPoly {
        let mut acc = CPoly::constant(ONE);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Coefficients padded with zeros to length `len`.
    pub(crate) fn padded(&self, len: usize) -> Vec<Complex64> {
        let mut c = self.coeffs.clone();
        c.resize(len.max(c.len()), ZERO);
        c
    }

    /// `|p(z)| / sum |a_k| |z|^k`, evaluated in the reversed variable when
    /// `|z| > 1` so that large degrees do not overflow.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        let n = self.degree();
        if z.norm() <= 1.0 {
            let mut p = ZERO;
            let mut s = 0.0;
            let r = z.norm();
            for &c in self.coeffs.iter().rev() {
                p = p * z + c;
                s = s * r + c.norm();
            }
            if s == 0.0 {
                0.0
            } else {
                p.norm() / s
            }
        } else {
            let y = z.inv();
            let r = y.norm();
            let mut p = ZERO;
            let mut s = 0.0;
            for &c in self.coeffs.iter().take(n + 1) {
                p = p * y + c;
                s = s * r + c.norm();
            }
            if s == 0.0 {
                0.0
            } else {
                p.norm() / s
            }
        }
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, rhs: &CPoly) -> CPoly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let a = self.padded(len);
        let b = rhs.padded(len);
        CPoly::new(a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, rhs: &CPoly) -> CPoly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let a = self.padded(len);
        let b = rhs.padded(len);
        CPoly::new(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, rhs: &CPoly) -> CPoly {
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scale(-ONE)
    }
}

/// One Newton correction `p(z)/p'(z)` from some polynomial source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    /// `p(z) == 0` exactly.
    Root,
    Step(Complex64),
    /// `p'(z) == 0` or the evaluation was not finite.
    Undefined,
}

/// Anything that can produce Newton corrections for a polynomial of known
/// degree.
pub trait NewtonRatio: Sync {
    fn degree(&self) -> usize;
    fn correction(&self, z: Complex64) -> Correction;
}

impl NewtonRatio for CPoly {
    fn degree(&self) -> usize {
        CPoly::degree(self)
    }

    fn correction(&self, z: Complex64) -> Correction {
        let n = self.degree();
        if z.norm() <= 1.0 {
            let (p, dp) = self.eval_with_derivative(z);
            ratio(p, dp)
        } else {
            // p(z) = z^n q(1/z), q the reversal
            let y = z.inv();
            let mut q = ZERO;
            let mut dq = ZERO;
            for &c in self.coeffs.iter() {
                dq = dq * y + q;
                q = q * y + c;
            }
            if q == ZERO {
                return Correction::Root;
            }
            // p'/p = n/z - y^2 q'(y)/q(y)
            let logd = y * n as f64 - cdiv(y * y * dq, q);
            if logd == ZERO || !logd.is_finite() {
                Correction::Undefined
            } else {
                Correction::Step(cdiv(ONE, logd))
            }
        }
    }
}

/// `a / b` without forming `|b|^2`, which underflows for tiny `b`.
pub fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    let s = b.re.abs().max(b.im.abs());
    if s == 0.0 || !s.is_finite() {
        return a / b;
    }
    let (a, b) = (a / s, b / s);
    a * b.conj() / b.norm_sqr()
}

fn ratio(p: Complex64, dp: Complex64) -> Correction {
    if p == ZERO {
        Correction::Root
    } else if dp == ZERO || !p.is_finite() || !dp.is_finite() {
        Correction::Undefined
    } else {
        let r = cdiv(p, dp);
        if r.is_finite() {
            Correction::Step(r)
        } else {
            Correction::Undefined
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AberthOptions {
    pub max_iterations: usize,
    /// Relative size of a correction at which a root counts as converged.
    pub epsilon: f64,
}

impl Default for AberthOptions {
    fn default() -> Self {
        AberthOptions {
            max_iterations: 600,
            epsilon: 4.0 * f64::EPSILON,
        }
    }
}

/// Outcome of a successful Aberth run.
#[derive(Debug, Clone)]
pub struct AberthRun {
    pub roots: Vec<Complex64>,
    pub iterations: usize,
}

/// Point `k` of `n` on a circle, slightly irregular: an exactly symmetric
/// start makes the whole configuration rotate rigidly and converge slowly.
fn ring_point(k: usize, n: usize, radius: f64, phase: f64) -> Complex64 {
    let u = (k as f64 * 0.618_033_988_749_895).fract() - 0.5;
    let angle = TAU * (k as f64 + 0.25 * u) / n as f64 + phase;
    Complex64::from_polar(radius * (1.0 + 0.01 * u), angle)
}

/// `n` points on a circle, rotated off the real axis.
pub fn circle_guesses(n: usize, center: Complex64, radius: f64) -> Vec<Complex64> {
    (0..n).map(|k| center + ring_point(k, n, radius, 0.4)).collect()
}

/// Initial guesses from the upper convex hull of `(k, ln|a_k|)`: each hull
/// edge contributes as many points as its width, on a circle whose radius
/// is the edge's slope.
pub fn newton_polygon_guesses(p: &CPoly) -> Vec<Complex64> {
    let n = p.degree();
    let pts: Vec<(usize, f64)> = p
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (k, c.norm().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(pts.len());
    for &pt in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 as f64 - x1 as f64) * (pt.1 - y1) - (y2 - y1) * (pt.0 as f64 - x1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut out = Vec::with_capacity(n);
    // roots at the origin: the hull starts at the first nonzero coefficient
    let zeros = pts.first().map_or(n, |&(k, _)| k);
    if zeros > 0 {
        let inner = hull
            .windows(2)
            .next()
            .map_or(1.0, |w| ((w[0].1 - w[1].1) / (w[1].0 - w[0].0) as f64).exp());
        out.extend((0..zeros).map(|k| ring_point(k, zeros, 1e-3 * inner, 0.4)));
    }
    for w in hull.windows(2) {
        let (i, li) = w[0];
        let (j, lj) = w[1];
        let width = j - i;
        let radius = ((li - lj) / width as f64).exp();
        for m in 0..width {
            out.push(ring_point(m, width, radius, TAU * i as f64 / n as f64 + 0.4));
        }
    }
    out
}

const PARALLEL_DEGREE: usize = 128;

/// Aberth–Ehrlich simultaneous iteration (Jacobi sweeps).
///
/// Each root is frozen once its correction is below `epsilon` relative to
/// its modulus, or once the correction stops shrinking at a level that can
/// only be rounding noise (multiple roots converge linearly and stall there).
pub fn aberth<P: NewtonRatio + ?Sized>(
    source: &P,
    initial: Vec<Complex64>,
    opts: AberthOptions,
) -> Result<AberthRun> {
    let n = initial.len();
    if n != source.degree() {
        return Err(Error::InvalidInput(format!(
            "{} initial guesses for degree {}",
            n,
            source.degree()
        )));
    }
    let mut z = initial;
    let mut done = vec![false; n];
    let mut last = vec![f64::INFINITY; n];
    for iter in 1..=opts.max_iterations {
        let prev = z.clone();
        let step = |k: usize| -> Option<Complex64> {
            if done[k] {
                return None;
            }
            let zk = prev[k];
            match source.correction(zk) {
                Correction::Root => Some(ZERO),
                Correction::Undefined => Some(Complex64::new(1e-7, 1e-7) * (1.0 + zk.norm())),
                Correction::Step(r) => {
                    let mut s = ZERO;
                    for (j, &zj) in prev.iter().enumerate() {
                        if j != k {
                            let d = zk - zj;
                            if d != ZERO {
                                s += d.inv();
                            }
                        }
                    }
                    let denom = ONE - r * s;
                    let w = if denom == ZERO || !denom.is_finite() {
                        r
                    } else {
                        r / denom
                    };
                    Some(if w.is_finite() { w } else { r })
                }
            }
        };
        let updates: Vec<Option<Complex64>> = if n >= PARALLEL_DEGREE {
            (0..n).into_par_iter().map(step).collect()
        } else {
            (0..n).map(step).collect()
        };
        let mut all_done = true;
        for (k, u) in updates.into_iter().enumerate() {
            let Some(w) = u else { continue };
            z[k] -= w;
            let size = w.norm();
            let scale = z[k].norm();
            if size <= opts.epsilon * scale
                || size == 0.0
                || (size < 1e-7 * (1.0 + scale) && size >= 0.5 * last[k])
            {
                done[k] = true;
            } else {
                all_done = false;
            }
            last[k] = size;
        }
        if all_done {
            return Ok(AberthRun { roots: z, iterations: iter });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        best: z,
    })
}

/// A root with its multiplicity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// All roots of `p`, clustered into multiplicity estimates.
///
/// Roots closer than `tol^(1/k)` (k the combined multiplicity) are merged;
/// every root satisfies `|p(r)| <= tol * sum |a_k| |r|^k`.
pub fn roots(p: &CPoly, tol: f64) -> Result<Vec<Root>> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} outside (0,1)")));
    }
    let all = all_roots_checked(p, Some(tol))?;
    let zeros = all.iter().filter(|z| **z == ZERO).count();
    let found: Vec<Complex64> = all.into_iter().filter(|z| *z != ZERO).collect();
    let mut clusters = cluster(&found, tol);
    // an m-fold root is a simple root of the (m-1)-th derivative
    for c in clusters.iter_mut().filter(|c| c.multiplicity > 1) {
        let mut q = p.clone();
        for _ in 1..c.multiplicity {
            q = q.derivative();
        }
        c.value = polish(&q, c.value, 8);
    }
    if zeros > 0 {
        clusters.push(Root {
            value: ZERO,
            multiplicity: zeros,
        });
    }
    Ok(clusters)
}

/// All `deg p` roots repeated by multiplicity, without clustering.
pub fn all_roots(p: &CPoly) -> Result<Vec<Complex64>> {
    all_roots_checked(p, None)
}

fn all_roots_checked(p: &CPoly, tol: Option<f64>) -> Result<Vec<Complex64>> {
    if !p.is_finite() {
        return Err(Error::DegenerateInput("non-finite coefficient".into()));
    }
    if p.degree() == 0 {
        return Err(Error::DegenerateInput("constant polynomial".into()));
    }
    let zeros = p.coeffs().iter().take_while(|c| **c == ZERO).count();
    let q = CPoly::new(p.coeffs()[zeros..].to_vec());
    let mut found = Vec::with_capacity(p.degree());
    if q.degree() > 0 {
        let guesses = newton_polygon_guesses(&q);
        // multiple roots converge linearly and may exhaust the cap; the
        // iterates are still acceptable when their residuals are
        let (candidates, iterations, capped) = match aberth(&q, guesses, AberthOptions::default()) {
            Ok(run) => (run.roots, run.iterations, false),
            Err(Error::NonConvergence { iterations, best }) => (best, iterations, true),
            Err(e) => return Err(e),
        };
        let limit = if capped { Some(tol.unwrap_or(1e-10)) } else { tol };
        let fails = |r: Complex64| limit.is_some_and(|t| !(q.relative_residual(r) <= t));
        for r in candidates {
            let mut r = polish(&q, r, 3);
            if fails(r) {
                // Newton is only linear near a multiple root
                r = polish(&q, r, 64);
            }
            if fails(r) {
                return Err(Error::NonConvergence {
                    iterations,
                    best: vec![r],
                });
            }
            found.push(r);
        }
    }
    found.extend(std::iter::repeat(ZERO).take(zeros));
    Ok(found)
}

/// Newton polishing that only accepts steps that reduce the residual.
pub fn polish<P: NewtonRatio + ?Sized>(source: &P, mut z: Complex64, steps: usize) -> Complex64 {
    for _ in 0..steps {
        match source.correction(z) {
            Correction::Step(r) if r.norm() <= 1e-6 * (1.0 + z.norm()) => {
                let next = z - r;
                if let Correction::Step(r2) = source.correction(next) {
                    if r2.norm() < r.norm() {
                        z = next;
                        continue;
                    }
                } else if let Correction::Root = source.correction(next) {
                    return next;
                }
                break;
            }
            _ => break,
        }
    }
    z
}

fn cluster(points: &[Complex64], tol: f64) -> Vec<Root> {
    let mut clusters: Vec<(Complex64, usize)> = points.iter().map(|&z| (z, 1)).collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let (zi, mi) = clusters[i];
                let (zj, mj) = clusters[j];
                let m = mi + mj;
                if (zi - zj).norm() < tol.powf(1.0 / m as f64) {
                    let c = (zi * mi as f64 + zj * mj as f64) / m as f64;
                    clusters[i] = (c, m);
                    clusters.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    clusters
        .into_iter()
        .map(|(value, multiplicity)| Root {
            value,
            multiplicity,
        })
        .collect()
}

/// Numerator and denominator of the `n`-th iterate of `num/den`.
///
/// Both are returned as homogeneous-degree `d^n` forms evaluated at `(z, 1)`,
/// so `max(deg)` equals `d^n` whenever the pair has no common root.
pub fn compose_iterate(num: &CPoly, den: &CPoly, n: u32) -> Result<(CPoly, CPoly)> {
    if den.is_zero() {
        return Err(Error::DegenerateInput("zero denominator".into()));
    }
    let d = num.degree().max(den.degree());
    let target = (d as u128).checked_pow(n).unwrap_or(u128::MAX);
    if target > SYMBOLIC_DEGREE_CAP as u128 {
        return Err(Error::Overflow {
            degree: target.min(usize::MAX as u128) as usize,
        });
    }
    let p = num.padded(d + 1);
    let q = den.padded(d + 1);
    let mut x = CPoly::monomial(ONE, 1);
    let mut y = CPoly::constant(ONE);
    for _ in 0..n {
        // powers of x and y up to d
        let xs: Vec<CPoly> = (0..=d).map(|k| x.pow(k)).collect();
        let ys: Vec<CPoly> = (0..=d).map(|k| y.pow(k)).collect();
        let mut nx = CPoly::constant(ZERO);
        let mut ny = CPoly::constant(ZERO);
        for k in 0..=d {
            let term = &xs[k] * &ys[d - k];
            nx = &nx + &term.scale(p[k]);
            ny = &ny + &term.scale(q[k]);
        }
        x = nx;
        y = ny;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Overflow {
                degree: x.degree().max(y.degree()),
            });
        }
    }
    Ok((x, y))
}
