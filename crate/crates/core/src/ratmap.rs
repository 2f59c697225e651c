//! Rational maps of the Riemann sphere.
//!
//! A map is stored both as an affine pair `num/den` and as a homogeneous lift
//! `F = (P, Q)` of degree `d` on `C^2`, normalized so that the coefficient
//! vector of `(P, Q)` has unit Euclidean norm. Periodic points are computed
//! in a rotated chart where no periodic point of the requested period sits
//! at infinity, so the fixed-point polynomial of `f^n` has full degree
//! `d^n + 1` and every cycle is finite in that chart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::polyroot::{aberth, cdiv, circle_guesses, newton_polygon_guesses, polish, AberthOptions, CPoly, Correction, NewtonRatio};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Chordal distance below which two points are the same point.
pub const IDENTITY_TOL: f64 = 1e-8;
/// `|multiplier(f^n) - 1|` below which a periodic point is treated as a
/// multiple root of `f^n(z) = z`.
pub const PARABOLIC_TOL: f64 = 1e-6;
/// Cap on `d^n` for periodic-point computations.
pub const MAX_PERIODIC_POINTS: usize = 65536;
/// Above this many points the simultaneous iteration is replaced by
/// independent Newton runs from the preimage tree.
const ABERTH_POINT_CAP: usize = 4097;

/// Point of the Riemann sphere in unit-normalized homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    x: Complex64,
    y: Complex64,
}

impl SpherePoint {
    pub fn new(x: Complex64, y: Complex64) -> Option<Self> {
        let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(SpherePoint { x: x / n, y: y / n })
    }

    pub fn affine(z: Complex64) -> Self {
        SpherePoint::new(z, ONE).unwrap_or(SpherePoint::INFINITY)
    }

    pub const INFINITY: SpherePoint = SpherePoint { x: ONE, y: ZERO };

    pub fn homogeneous(&self) -> (Complex64, Complex64) {
        (self.x, self.y)
    }

    /// Chordal distance `|x1 y2 - x2 y1|`, at most 1.
    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        (self.x * other.y - other.x * self.y).norm()
    }

    pub fn is_infinity(&self) -> bool {
        self.chordal(&SpherePoint::INFINITY) < 1e-12
    }

    /// Affine coordinate, `None` at infinity.
    pub fn to_affine(&self) -> Option<Complex64> {
        if self.is_infinity() {
            None
        } else {
            Some(self.x / self.y)
        }
    }

    /// Affine coordinate with infinity encoded as `+inf`.
    pub fn to_complex_or_inf(&self) -> Complex64 {
        self.to_affine().unwrap_or(Complex64::new(f64::INFINITY, 0.0))
    }
}

/// `z -> (a z + b) / (c z + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mobius { a, b, c, d }
    }

    pub fn identity() -> Self {
        Mobius::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Mobius {
        Mobius::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let (x, y) = p.homogeneous();
        SpherePoint::new(self.a * x + self.b * y, self.c * x + self.d * y)
            .expect("invertible Mobius map")
    }

    /// Sphere rotation that sends `p` to infinity.
    pub fn rotation_to_infinity(p: Complex64) -> Mobius {
        Mobius::new(p.conj(), ONE, -ONE, p)
    }
}

/// Value and partial derivatives of `sum c_k X^k Y^(d-k)`.
fn eval_form(coeffs: &[Complex64], x: Complex64, y: Complex64) -> (Complex64, Complex64, Complex64) {
    let d = coeffs.len() - 1;
    if d == 0 {
        return (coeffs[0], ZERO, ZERO);
    }
    // homogeneous Horner in x, carrying the powers of y
    let mut v = coeffs[d];
    let mut dx = ZERO;
    let mut dy = ZERO;
    let mut yp = ONE;
    for k in (0..d).rev() {
        let j = (d - k) as f64;
        let prev = yp;
        yp *= y;
        dx = dx * x + v;
        dy = dy * x + coeffs[k] * j * prev;
        v = v * x + coeffs[k] * yp;
    }
    (v, dx, dy)
}

/// Homogeneous polynomial map `F = (P, Q)` of degree `d` on `C^2`;
/// `p[k]`, `q[k]` are the coefficients of `X^k Y^(d-k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousLift {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
}

/// Escape-rate value with an estimate of the truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenValue {
    pub value: f64,
    /// Bound on the change from further iterations, `C d^-iters / (d-1)`
    /// with `C` the largest one-step log growth seen along the orbit.
    pub tail_bound: f64,
    pub step_constant: f64,
}

impl HomogeneousLift {
    pub fn new(p: Vec<Complex64>, q: Vec<Complex64>) -> Result<Self> {
        if p.len() != q.len() || p.len() < 2 {
            return Err(Error::InvalidInput("lift forms must share degree >= 1".into()));
        }
        Ok(HomogeneousLift { p, q })
    }

    pub fn degree(&self) -> usize {
        self.p.len() - 1
    }

    pub fn p(&self) -> &[Complex64] {
        &self.p
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn coeff_norm(&self) -> f64 {
        self.p.iter().chain(&self.q).map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.coeff_norm();
        HomogeneousLift {
            p: self.p.iter().map(|c| c / n).collect(),
            q: self.q.iter().map(|c| c / n).collect(),
        }
    }

    pub fn apply(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        (eval_form(&self.p, x, y).0, eval_form(&self.q, x, y).0)
    }

    /// `F(x)` together with the Jacobian rows `(P_X, P_Y)`, `(Q_X, Q_Y)`.
    pub fn apply_with_jacobian(&self, x: Complex64, y: Complex64) -> [Complex64; 6] {
        let (pv, px, py) = eval_form(&self.p, x, y);
        let (qv, qx, qy) = eval_form(&self.q, x, y);
        [pv, qv, px, py, qx, qy]
    }

    /// Homogeneous resultant via the Sylvester determinant.
    pub fn resultant(&self) -> Complex64 {
        let d = self.degree();
        let size = 2 * d;
        let mut m = vec![vec![ZERO; size]; size];
        for r in 0..d {
            for k in 0..=d {
                // highest power first
                m[r][r + k] = self.p[d - k];
                m[d + r][r + k] = self.q[d - k];
            }
        }
        determinant(m)
    }

    /// `d^-iters ln ||F^iters(point)||`, with one renormalization per step so
    /// that only logarithms accumulate.
    pub fn green(&self, point: (Complex64, Complex64), iters: u32) -> Result<GreenValue> {
        let d = self.degree() as f64;
        let (mut x, mut y) = point;
        let norm0 = (x.norm_sqr() + y.norm_sqr()).sqrt();
        if norm0 < 1e-14 || !norm0.is_finite() {
            return Err(Error::IndeterminatePoint);
        }
        x /= norm0;
        y /= norm0;
        let mut value = norm0.ln();
        let mut weight = 1.0;
        let mut step_constant: f64 = 0.0;
        for _ in 0..iters {
            let (nx, ny) = self.apply(x, y);
            let n = (nx.norm_sqr() + ny.norm_sqr()).sqrt();
            if n < 1e-14 {
                return Err(Error::IndeterminatePoint);
            }
            weight /= d;
            let l = n.ln();
            step_constant = step_constant.max(l.abs());
            value += weight * l;
            x = nx / n;
            y = ny / n;
        }
        Ok(GreenValue {
            value,
            tail_bound: step_constant * weight / (d - 1.0),
            step_constant,
        })
    }
}

fn determinant(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = ONE;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].norm().partial_cmp(&m[b][col].norm()).unwrap())
            .unwrap();
        if m[pivot][col] == ZERO {
            return ZERO;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let pv = m[col][col];
        det *= pv;
        for r in (col + 1)..n {
            let f = m[r][col] / pv;
            if f == ZERO {
                continue;
            }
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    det
}

/// Stability class of a cycle from its multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Attracting,
    Neutral,
    Repelling,
}

impl Stability {
    pub fn of(multiplier: Complex64) -> Self {
        let m = multiplier.norm();
        if (m - 1.0).abs() <= 1e-9 {
            Stability::Neutral
        } else if m < 1.0 {
            Stability::Attracting
        } else {
            Stability::Repelling
        }
    }
}

/// A fixed point of `f^n` and the multiplier of `f^n` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: SpherePoint,
    pub multiplier: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub points: Vec<SpherePoint>,
    pub multiplier: Complex64,
    pub stability: Stability,
}

/// Cycles of exact period `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSpectrum {
    pub period: u32,
    pub cycles: Vec<Cycle>,
}

impl CycleSpectrum {
    /// Number of cycles, `N(n)`.
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn multipliers(&self) -> Vec<Complex64> {
        self.cycles.iter().map(|c| c.multiplier).collect()
    }

    pub fn point_count(&self) -> usize {
        self.cycles.iter().map(|c| c.points.len()).sum()
    }
}

/// Number of points of exact period `n` of a generic degree-`d` map:
/// `sum_{k | n} mobius(n/k) (d^k + 1)`.
pub fn exact_period_count(d: u64, n: u32) -> i64 {
    divisors(n)
        .into_iter()
        .map(|k| mobius(n / k) * (d.pow(k) as i64 + 1))
        .sum()
}

pub fn divisors(n: u32) -> Vec<u32> {
    (1..=n).filter(|k| n % k == 0).collect()
}

pub fn mobius(n: u32) -> i64 {
    let mut m = n;
    let mut result = 1;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if m > 1 {
        result = -result;
    }
    result
}

/// Degree-`d >= 2` rational map with a nonvanishing resultant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalMap {
    num: CPoly,
    den: CPoly,
    degree: usize,
    lift: HomogeneousLift,
}

impl RationalMap {
    pub fn new(num: CPoly, den: CPoly) -> Result<Self> {
        if !num.is_finite() || !den.is_finite() || den.is_zero() {
            return Err(Error::DegenerateInput("numerator/denominator not usable".into()));
        }
        let degree = num.degree().max(den.degree());
        if degree < 2 {
            return Err(Error::DegenerateInput(format!("degree {degree} < 2")));
        }
        let raw = HomogeneousLift {
            p: num.padded(degree + 1),
            q: den.padded(degree + 1),
        };
        let lift = raw.normalized();
        let res = lift.resultant().norm();
        if !(res > 1e-12) {
            return Err(Error::DegenerateInput(format!(
                "normalized resultant {res:e} too small (common root)"
            )));
        }
        Ok(RationalMap {
            num,
            den,
            degree,
            lift,
        })
    }

    pub fn from_lift(lift: &HomogeneousLift) -> Result<Self> {
        RationalMap::new(CPoly::new(lift.p.clone()), CPoly::new(lift.q.clone()))
    }

    pub fn polynomial(p: CPoly) -> Result<Self> {
        RationalMap::new(p, CPoly::constant(ONE))
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        RationalMap::polynomial(CPoly::new(vec![c, ZERO, ONE])).expect("z^2 + c is degree 2")
    }

    /// `z^d`.
    pub fn power(d: usize) -> Result<Self> {
        RationalMap::polynomial(CPoly::monomial(ONE, d))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &CPoly {
        &self.num
    }

    pub fn denominator(&self) -> &CPoly {
        &self.den
    }

    /// Lift normalized to unit coefficient norm.
    pub fn lift(&self) -> &HomogeneousLift {
        &self.lift
    }

    pub fn apply(&self, z: &SpherePoint) -> SpherePoint {
        let (x, y) = z.homogeneous();
        let (nx, ny) = self.lift.apply(x, y);
        SpherePoint::new(nx, ny).unwrap_or(SpherePoint::INFINITY)
    }

    pub fn iterate(&self, z: &SpherePoint, n: u32) -> SpherePoint {
        (0..n).fold(*z, |acc, _| self.apply(&acc))
    }

    /// `f'(z)` for finite `z` with finite image.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        chart_derivative(&self.lift, z)
    }

    /// `M o f o M^-1`.
    pub fn conjugate(&self, m: &Mobius) -> Result<RationalMap> {
        let scale = [m.a, m.b, m.c, m.d].iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(m.det().norm() > 1e-12 * scale * scale) {
            return Err(Error::SingularMatrix { det: m.det().norm() });
        }
        let inv = m.inverse();
        let d = self.degree;
        // (a z + b)^k (c z + d)^(d-k) for the inverse matrix
        let lin_x = CPoly::new(vec![inv.b, inv.a]);
        let lin_y = CPoly::new(vec![inv.d, inv.c]);
        let mut pt = CPoly::constant(ZERO);
        let mut qt = CPoly::constant(ZERO);
        for k in 0..=d {
            let term = &lin_x.pow(k) * &lin_y.pow(d - k);
            pt = &pt + &term.scale(self.lift.p[k]);
            qt = &qt + &term.scale(self.lift.q[k]);
        }
        let gp = &pt.scale(m.a) + &qt.scale(m.b);
        let gq = &pt.scale(m.c) + &qt.scale(m.d);
        let lift = HomogeneousLift {
            p: gp.padded(d + 1),
            q: gq.padded(d + 1),
        };
        RationalMap::from_lift(&lift)
    }

    /// Escape rate `d^-iters ln ||F^iters(point)||` of the normalized lift.
    pub fn green(&self, point: (Complex64, Complex64), iters: u32) -> Result<GreenValue> {
        self.lift.green(point, iters)
    }

    fn periodic_count(&self, n: u32) -> Result<usize> {
        let total = (self.degree as u128).checked_pow(n).unwrap_or(u128::MAX);
        if total > MAX_PERIODIC_POINTS as u128 {
            return Err(Error::PeriodTooLarge {
                period: n,
                points: total.min(usize::MAX as u128) as usize,
                cap: MAX_PERIODIC_POINTS,
            });
        }
        Ok(total as usize + 1)
    }

    /// All `d^n + 1` fixed points of `f^n` with the multiplier of `f^n`.
    pub fn periodic_points(&self, n: u32) -> Result<Vec<PeriodicPoint>> {
        let chart = RotatedChart::choose(self, n)?;
        let raw = chart.fixed_points_of_iterate(n)?;
        Ok(raw
            .into_iter()
            .map(|u| PeriodicPoint {
                point: chart.to_sphere(u),
                multiplier: chart.orbit_multiplier(u, n),
            })
            .collect())
    }

    /// Cycles of exact period `n`, using the default identity tolerance.
    pub fn exact_cycles(&self, n: u32) -> Result<CycleSpectrum> {
        self.exact_cycles_with(n, IDENTITY_TOL)
    }

    /// Fixed points of `f^n` in a chart, with the indices of those of exact
    /// period `n`. Fails on parabolic points and on a wrong exact count.
    fn exact_points(&self, n: u32, identity_tol: f64) -> Result<ExactPoints> {
        if n == 0 {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let chart = RotatedChart::choose(self, n)?;
        let raw = chart.fixed_points_of_iterate(n)?;
        let points: Vec<SpherePoint> = raw.iter().map(|&u| chart.to_sphere(u)).collect();
        let multipliers: Vec<Complex64> = raw.iter().map(|&u| chart.orbit_multiplier(u, n)).collect();

        let parabolic: Vec<Complex64> = points
            .iter()
            .zip(&multipliers)
            .filter(|(_, m)| (*m - ONE).norm() < PARABOLIC_TOL)
            .map(|(p, _)| p.to_complex_or_inf())
            .collect();
        if !parabolic.is_empty() {
            return Err(Error::AmbiguousPeriod { points: parabolic });
        }

        let mut lower: Vec<SpherePoint> = Vec::new();
        for k in divisors(n).into_iter().filter(|&k| k < n) {
            lower.extend(self.periodic_points(k)?.into_iter().map(|p| p.point));
        }
        let mut exact_idx = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let nearest = lower.iter().map(|q| q.chordal(p)).fold(f64::INFINITY, f64::min);
            if nearest >= identity_tol {
                exact_idx.push(i);
            }
        }
        let expected = exact_period_count(self.degree as u64, n);
        if exact_idx.len() as i64 != expected {
            // the points closest to a lower-period point are the suspects
            let mut suspects: Vec<(f64, Complex64)> = points
                .iter()
                .map(|p| {
                    let d = lower.iter().map(|q| q.chordal(p)).fold(f64::INFINITY, f64::min);
                    (d, p.to_complex_or_inf())
                })
                .collect();
            suspects.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let k = (exact_idx.len() as i64 - expected).unsigned_abs() as usize;
            return Err(Error::AmbiguousPeriod {
                points: suspects.into_iter().take(k.max(1) * 2).map(|(_, z)| z).collect(),
            });
        }

        Ok(ExactPoints { chart, raw, exact_idx })
    }

    /// Cycles of exact period `n`: fixed points of `f^n` minus the fixed
    /// points of `f^k` for proper divisors `k`, grouped along orbits.
    pub fn exact_cycles_with(&self, n: u32, identity_tol: f64) -> Result<CycleSpectrum> {
        let ExactPoints { chart, raw, exact_idx } = self.exact_points(n, identity_tol)?;
        // group along orbits in the chart
        let mut sorted = exact_idx.clone();
        sorted.sort_by(|&a, &b| raw[a].re.total_cmp(&raw[b].re));
        let mut index = PointIndex::default();
        for &j in &sorted {
            index.insert(raw[j]);
        }
        let slot_of: Vec<usize> = sorted.clone();
        let mut used = vec![false; raw.len()];
        let mut cycles = Vec::new();
        for &start in &exact_idx {
            if used[start] {
                continue;
            }
            let mut members = vec![start];
            used[start] = true;
            let mut u = raw[start];
            for _ in 1..n {
                let image = chart.step(u);
                let next = image.to_affine().and_then(|w| {
                    let radius = 1e-6 * (1.0 + w.norm_sqr());
                    index.nearest_where(w, radius, |slot| !used[slot_of[slot]]).map(|slot| slot_of[slot])
                });
                let Some(j) = next else {
                    return Err(Error::AmbiguousPeriod {
                        points: vec![chart.to_sphere(u).to_complex_or_inf()],
                    });
                };
                if SpherePoint::affine(raw[j]).chordal(&image) > 1e-6 {
                    return Err(Error::AmbiguousPeriod {
                        points: vec![chart.to_sphere(raw[j]).to_complex_or_inf()],
                    });
                }
                used[j] = true;
                members.push(j);
                u = raw[j];
            }
            let multiplier = members
                .iter()
                .map(|&j| chart.map.derivative(raw[j]))
                .fold(ONE, |a, b| a * b);
            cycles.push(Cycle {
                points: members.iter().map(|&j| chart.to_sphere(raw[j])).collect(),
                multiplier,
                stability: Stability::of(multiplier),
            });
        }
        Ok(CycleSpectrum { period: n, cycles })
    }
}

struct ExactPoints {
    chart: RotatedChart,
    raw: Vec<Complex64>,
    exact_idx: Vec<usize>,
}

fn chart_derivative(lift: &HomogeneousLift, z: Complex64) -> Complex64 {
    let [p, q, px, _, qx, _] = lift.apply_with_jacobian(z, ONE);
    cdiv(px * q - p * qx, q * q)
}

/// A conjugate of `f` by a sphere rotation that moves a non-periodic point
/// to infinity.
struct RotatedChart {
    map: RationalMap,
    back: Mobius,
}

impl RotatedChart {
    fn choose(f: &RationalMap, n: u32) -> Result<Self> {
        f.periodic_count(n)?;
        let mut best: Option<(f64, Complex64)> = None;
        for j in 0..10 {
            let r = [0.61, 1.37, 0.83, 2.21, 0.47, 1.09, 3.1, 0.29, 1.71, 0.71][j];
            let p = Complex64::from_polar(r, 0.53 + 2.399_963 * j as f64);
            let sp = SpherePoint::affine(p);
            let dist = f.iterate(&sp, n).chordal(&sp);
            if best.map_or(true, |(d, _)| dist > d) {
                best = Some((dist, p));
            }
            if dist > 0.3 {
                break;
            }
        }
        let (_, p) = best.unwrap();
        let rot = Mobius::rotation_to_infinity(p);
        let map = f.conjugate(&rot)?;
        Ok(RotatedChart {
            map,
            back: rot.inverse(),
        })
    }

    fn to_sphere(&self, u: Complex64) -> SpherePoint {
        self.back.apply(&SpherePoint::affine(u))
    }

    fn step(&self, u: Complex64) -> SpherePoint {
        self.map.apply(&SpherePoint::affine(u))
    }

    fn orbit_multiplier(&self, u: Complex64, n: u32) -> Complex64 {
        let mut z = u;
        let mut m = ONE;
        for _ in 0..n {
            m *= self.map.derivative(z);
            let (x, y) = self.map.lift.apply(z, ONE);
            z = x / y;
        }
        m
    }

    /// `f^-n(q)`: every leaf of the depth-`n` preimage tree of `q`.
    fn preimage_tree(&self, q: Complex64, n: u32) -> Vec<Complex64> {
        let num = self.map.numerator();
        let den = self.map.denominator();
        let mut level = vec![q];
        for _ in 0..n {
            level = level
                .par_iter()
                .flat_map_iter(|&u| {
                    let eq = num - &den.scale(u);
                    if eq.degree() == 0 {
                        return Vec::new();
                    }
                    aberth(&eq, newton_polygon_guesses(&eq), AberthOptions::default())
                        .map(|run| run.roots.into_iter().filter(|z| z.is_finite()).collect())
                        .unwrap_or_default()
                })
                .collect();
        }
        level
    }

    /// The preimage tree of a generic point equidistributes like the fixed
    /// points of `f^n`, so it is a much better start than a circle.
    fn preimage_guesses(&self, n: u32, count: usize) -> Vec<Complex64> {
        let mut level = self.preimage_tree(PREIMAGE_BASE, n);
        level.truncate(count);
        let missing = count - level.len();
        if missing > 0 {
            let radius = level.iter().map(|z| z.norm()).fold(1.0, f64::max) * 1.5;
            level.extend(circle_guesses(missing, ZERO, radius));
        }
        level
    }

    fn fixed_points_of_iterate(&self, n: u32) -> Result<Vec<Complex64>> {
        let source = IterateFixedPoints {
            lift: &self.map.lift,
            n,
            degree: self.map.periodic_count(n)?,
        };
        if source.degree > ABERTH_POINT_CAP {
            return self.track_fixed_points(&source);
        }
        let guesses = self.preimage_guesses(n, source.degree);
        let opts = AberthOptions {
            max_iterations: 2000,
            ..AberthOptions::default()
        };
        let run = aberth(&source, guesses, opts).map_err(|e| Error::RootFindingFailed(Box::new(e)))?;
        Ok(run.roots.into_iter().map(|u| polish(&source, u, 2)).collect())
    }

    /// Fixed points of `f^n` by path tracking from `(u - a)(q Y_n - X_n)`,
    /// whose roots are `a` and the preimage tree of `q`.
    fn track_fixed_points(&self, source: &IterateFixedPoints) -> Result<Vec<Complex64>> {
        let mut start = self.preimage_tree(PREIMAGE_BASE, source.n);
        if start.len() + 1 != source.degree {
            return Err(Error::RootFindingFailed(Box::new(Error::NonConvergence {
                iterations: 0,
                best: start,
            })));
        }
        start.push(HOMOTOPY_EXTRA_ROOT);
        let homotopy = Homotopy {
            lift: source.lift,
            n: source.n,
            gamma: HOMOTOPY_GAMMA,
        };
        let ends: Vec<Option<Complex64>> = start.par_iter().map(|&u| homotopy.track(u)).collect();

        let mut tracked: Vec<Complex64> = ends.iter().flatten().map(|&u| polish(source, u, 3)).collect();
        tracked.sort_by(|a, b| a.re.total_cmp(&b.re));
        let mut index = PointIndex::default();
        for u in tracked {
            if index.nearest(u, 1e-8 * (1.0 + u.norm())).is_none() {
                index.insert(u);
            }
        }
        let missing = source.degree - index.points.len();
        if missing > 0 && missing <= 64 {
            // paths that failed or collided: recover the rest by deflation
            let deflated = Deflated {
                source,
                found: &index.points,
                degree: missing,
            };
            let radius = index.points.iter().map(|z| z.norm()).fold(1.0, f64::max) * 2.0;
            let opts = AberthOptions {
                max_iterations: 1000,
                ..AberthOptions::default()
            };
            let run = aberth(&deflated, circle_guesses(missing, ZERO, radius), opts)
                .map_err(|e| Error::RootFindingFailed(Box::new(e)))?;
            let mut extra: Vec<Complex64> = run.roots.into_iter().map(|u| polish(source, u, 2)).collect();
            extra.sort_by(|a, b| a.re.total_cmp(&b.re));
            for u in extra {
                if index.nearest(u, 1e-8 * (1.0 + u.norm())).is_none() {
                    index.insert(u);
                }
            }
        }
        if index.points.len() != source.degree {
            return Err(Error::RootFindingFailed(Box::new(Error::NonConvergence {
                iterations: HOMOTOPY_MAX_STEPS,
                best: index.points,
            })));
        }
        Ok(index.points)
    }
}

const PREIMAGE_BASE: Complex64 = Complex64::new(0.373, 0.219);
const HOMOTOPY_EXTRA_ROOT: Complex64 = Complex64::new(-0.613, 0.457);
const HOMOTOPY_GAMMA: Complex64 = Complex64::new(0.817, -0.577);
const HOMOTOPY_MAX_STEPS: usize = 20_000;

/// `H(u, t) = (1 - t) gamma (u - a)(q Y_n - X_n) + t (u Y_n - X_n)`.
struct Homotopy<'a> {
    lift: &'a HomogeneousLift,
    n: u32,
    gamma: Complex64,
}

impl Homotopy<'_> {
    /// `(H, dH/du, dH/dt)` up to a common positive factor.
    fn eval(&self, u: Complex64, t: f64) -> Option<[Complex64; 3]> {
        let (mut x, mut y, mut dx, mut dy) = (u, ONE, ONE, ZERO);
        for _ in 0..self.n {
            let [pv, qv, px, py, qx, qy] = self.lift.apply_with_jacobian(x, y);
            let ndx = px * dx + py * dy;
            let ndy = qx * dx + qy * dy;
            let s = pv.norm().max(qv.norm());
            if s == 0.0 || !s.is_finite() {
                return None;
            }
            x = pv / s;
            y = qv / s;
            dx = ndx / s;
            dy = ndy / s;
        }
        let f = u * y - x;
        let df = y + u * dy - dx;
        let p = PREIMAGE_BASE * y - x;
        let dp = PREIMAGE_BASE * dy - dx;
        let g = self.gamma * (u - HOMOTOPY_EXTRA_ROOT) * p;
        let dg = self.gamma * (p + (u - HOMOTOPY_EXTRA_ROOT) * dp);
        let h = (1.0 - t) * g + t * f;
        let dh = (1.0 - t) * dg + t * df;
        let out = [h, dh, f - g];
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    /// Euler predictor with a Newton corrector that must contract fast.
    fn track(&self, mut u: Complex64) -> Option<Complex64> {
        let mut t = 0.0;
        let mut dt: f64 = 0.05;
        let mut streak = 0;
        let [_, mut dh, mut ht] = self.eval(u, t)?;
        for _ in 0..HOMOTOPY_MAX_STEPS {
            if t >= 1.0 {
                return Some(u);
            }
            if dh == ZERO {
                return None;
            }
            let velocity = -cdiv(ht, dh);
            let t1 = if dt >= 1.0 - t { 1.0 } else { t + dt };
            let mut v = u + velocity * (t1 - t);
            let mut accepted = None;
            let mut last = f64::INFINITY;
            for k in 0..4 {
                let Some([h, dhv, htv]) = self.eval(v, t1) else {
                    break;
                };
                if dhv == ZERO {
                    break;
                }
                let delta = cdiv(h, dhv);
                let size = delta.norm();
                if k > 0 && size > 0.25 * last {
                    break;
                }
                v -= delta;
                last = size;
                if size <= 1e-8 * (1.0 + v.norm()) {
                    accepted = Some((dhv, htv));
                    break;
                }
            }
            if let Some((dhv, htv)) = accepted {
                u = v;
                t = t1;
                (dh, ht) = (dhv, htv);
                streak += 1;
                if streak >= 2 {
                    dt = (dt * 2.0).min(0.25);
                    streak = 0;
                }
            } else {
                dt *= 0.5;
                streak = 0;
                if dt < 1e-12 {
                    return None;
                }
            }
        }
        None
    }
}

/// Newton ratio of a source with known roots divided out.
struct Deflated<'a, P> {
    source: &'a P,
    found: &'a [Complex64],
    degree: usize,
}

impl<P: NewtonRatio> NewtonRatio for Deflated<'_, P> {
    fn degree(&self) -> usize {
        self.degree
    }

    fn correction(&self, u: Complex64) -> Correction {
        let r = match self.source.correction(u) {
            Correction::Step(r) => r,
            other => return other,
        };
        let mut logd = cdiv(ONE, r);
        for &z in self.found {
            if z == u {
                return Correction::Undefined;
            }
            logd -= cdiv(ONE, u - z);
        }
        if logd == ZERO || !logd.is_finite() {
            Correction::Undefined
        } else {
            Correction::Step(cdiv(ONE, logd))
        }
    }
}

/// Points kept sorted by real part for windowed nearest-neighbour queries.
#[derive(Default)]
struct PointIndex {
    points: Vec<Complex64>,
    order: Vec<(f64, usize)>,
}

impl PointIndex {
    fn insert(&mut self, u: Complex64) {
        let at = self.order.partition_point(|&(re, _)| re < u.re);
        self.order.insert(at, (u.re, self.points.len()));
        self.points.push(u);
    }

    /// Index of the closest stored point within Euclidean distance `radius`.
    fn nearest(&self, u: Complex64, radius: f64) -> Option<usize> {
        self.nearest_where(u, radius, |_| true)
    }

    fn nearest_where(&self, u: Complex64, radius: f64, keep: impl Fn(usize) -> bool) -> Option<usize> {
        let lo = self.order.partition_point(|&(re, _)| re < u.re - radius);
        self.order[lo..]
            .iter()
            .take_while(|&&(re, _)| re <= u.re + radius)
            .filter(|&&(_, j)| keep(j))
            .map(|&(_, j)| (j, (self.points[j] - u).norm()))
            .filter(|&(_, d)| d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
    }
}

/// Newton ratio of `z Y_n(z,1) - X_n(z,1)` where `(X_n, Y_n) = F^n`,
/// computed by point evaluation with per-step rescaling.
struct IterateFixedPoints<'a> {
    lift: &'a HomogeneousLift,
    n: u32,
    degree: usize,
}

impl NewtonRatio for IterateFixedPoints<'_> {
    fn degree(&self) -> usize {
        self.degree
    }

    fn correction(&self, u: Complex64) -> Correction {
        let (mut x, mut y, mut dx, mut dy) = (u, ONE, ONE, ZERO);
        for _ in 0..self.n {
            let [pv, qv, px, py, qx, qy] = self.lift.apply_with_jacobian(x, y);
            let ndx = px * dx + py * dy;
            let ndy = qx * dx + qy * dy;
            let s = pv.norm().max(qv.norm());
            if s == 0.0 || !s.is_finite() {
                return Correction::Undefined;
            }
            x = pv / s;
            y = qv / s;
            dx = ndx / s;
            dy = ndy / s;
        }
        let h = u * y - x;
        let dh = y + u * dy - dx;
        if h == ZERO {
            Correction::Root
        } else if dh == ZERO || !dh.is_finite() || !h.is_finite() {
            Correction::Undefined
        } else {
            Correction::Step(cdiv(h, dh))
        }
    }
}
