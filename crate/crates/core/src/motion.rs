//! Holomorphic discs through centers, traced by predictor-corrector
//! continuation of `p_n(lambda, t) = 0`, `p_m(lambda, 0) = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moduli2::{pn, ModuliPoint};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

const FD_STEP: f64 = 1e-7;
const MAX_CONDITION: f64 = 1e10;
const MAX_HALVINGS: usize = 20;
const NEWTON_ITERATIONS: usize = 12;
const NEWTON_TARGET: f64 = 1e-12;
const ACCEPT_RESIDUAL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSample {
    pub t: Complex64,
    pub lambda: ModuliPoint,
    /// Distance from `t` to the nearest root of `p_n(lambda, .)`.
    pub res_n: f64,
    /// Distance from 0 to the nearest root of `p_m(lambda, .)`.
    pub res_m: f64,
    /// Roots of `p_n(lambda, .)` in the open unit disc.
    pub roots_in_disc: usize,
    /// The in-disc root of `p_n(lambda, .)`.
    pub guide_root: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedDisc {
    pub n: u32,
    pub m: u32,
    pub center: ModuliPoint,
    pub ray_angle: f64,
    pub samples: Vec<DiscSample>,
    /// Total number of step halvings during the trace.
    pub halvings: usize,
}

impl GuidedDisc {
    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.res_n.max(s.res_m)).fold(0.0, f64::max)
    }
}

/// Roots nearest `t` and `0` of `p_n` and `p_m`, as the residual pair.
struct System {
    n: u32,
    m: u32,
}

struct Evaluation {
    f: [Complex64; 2],
    roots_in_disc: usize,
    guide_root: Complex64,
}

fn nearest(roots: &[Complex64], target: Complex64) -> Result<Complex64> {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (a - target).norm().partial_cmp(&(b - target).norm()).unwrap())
        .ok_or_else(|| Error::DegenerateInput("multiplier polynomial has no roots".into()))
}

impl System {
    fn eval(&self, lambda: &ModuliPoint, t: Complex64) -> Result<Evaluation> {
        let guide = pn(lambda, self.n)?;
        let carrier = pn(lambda, self.m)?;
        let wn = nearest(&guide.roots, t)?;
        let wm = nearest(&carrier.roots, ZERO)?;
        Ok(Evaluation {
            f: [wn - t, wm],
            roots_in_disc: guide.roots_in_disc().len(),
            guide_root: wn,
        })
    }

    fn residual(&self, lambda: &ModuliPoint, t: Complex64) -> Result<[Complex64; 2]> {
        Ok(self.eval(lambda, t)?.f)
    }

    /// Central-difference Jacobian in `(l1, l2)`.
    fn jacobian(&self, lambda: &ModuliPoint, t: Complex64) -> Result<[[Complex64; 2]; 2]> {
        let h = Complex64::new(FD_STEP, 0.0);
        let shift = |d1: Complex64, d2: Complex64| ModuliPoint::new(lambda.l1 + d1, lambda.l2 + d2);
        let a = self.residual(&shift(h, ZERO), t)?;
        let b = self.residual(&shift(-h, ZERO), t)?;
        let c = self.residual(&shift(ZERO, h), t)?;
        let d = self.residual(&shift(ZERO, -h), t)?;
        let two_h = 2.0 * h;
        Ok([
            [(a[0] - b[0]) / two_h, (c[0] - d[0]) / two_h],
            [(a[1] - b[1]) / two_h, (c[1] - d[1]) / two_h],
        ])
    }
}

fn condition(j: &[[Complex64; 2]; 2]) -> f64 {
    let fro2: f64 = j.iter().flatten().map(|v| v.norm_sqr()).sum();
    let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).norm();
    if det == 0.0 {
        return f64::INFINITY;
    }
    // singular values from s1^2 + s2^2 = |J|_F^2 and s1 s2 = |det|
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((fro2 + disc) / 2.0).sqrt();
    let s2 = det / s1;
    s1 / s2
}

fn solve(j: &[[Complex64; 2]; 2], rhs: [Complex64; 2]) -> [Complex64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    [
        (rhs[0] * j[1][1] - rhs[1] * j[0][1]) / det,
        (j[0][0] * rhs[1] - j[1][0] * rhs[0]) / det,
    ]
}

fn norm2(v: [Complex64; 2]) -> f64 {
    v[0].norm().max(v[1].norm())
}

enum Correction {
    Converged(ModuliPoint, Evaluation),
    Failed,
}

impl System {
    fn checked_jacobian(&self, lambda: &ModuliPoint, t: Complex64) -> Result<[[Complex64; 2]; 2]> {
        let j = self.jacobian(lambda, t)?;
        let cond = condition(&j);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::SingularJacobian { condition: cond, t });
        }
        Ok(j)
    }

    fn correct(&self, mut lambda: ModuliPoint, t: Complex64) -> Result<Correction> {
        let Ok(mut ev) = self.eval(&lambda, t) else {
            return Ok(Correction::Failed);
        };
        for _ in 0..NEWTON_ITERATIONS {
            let r = norm2(ev.f);
            if r < NEWTON_TARGET {
                break;
            }
            let j = self.checked_jacobian(&lambda, t)?;
            let dl = solve(&j, ev.f);
            let next = ModuliPoint::new(lambda.l1 - dl[0], lambda.l2 - dl[1]);
            let Ok(next_ev) = self.eval(&next, t) else {
                return Ok(Correction::Failed);
            };
            if norm2(next_ev.f) >= r {
                break;
            }
            lambda = next;
            ev = next_ev;
        }
        if norm2(ev.f) < ACCEPT_RESIDUAL {
            Ok(Correction::Converged(lambda, ev))
        } else {
            Ok(Correction::Failed)
        }
    }
}

fn sample(t: Complex64, lambda: ModuliPoint, ev: &Evaluation) -> DiscSample {
    DiscSample {
        t,
        lambda,
        res_n: ev.f[0].norm(),
        res_m: ev.f[1].norm(),
        roots_in_disc: ev.roots_in_disc,
        guide_root: ev.guide_root,
    }
}

/// Traces `t -> lambda(t)` along `t = s e^{i ray_angle}`, `s = 0 .. r_max`
/// in `steps` uniform increments.
pub fn trace_disc(center: &ModuliPoint, n: u32, m: u32, ray_angle: f64, r_max: f64, steps: usize) -> Result<GuidedDisc> {
    if n == m || n == 0 || m == 0 {
        return Err(Error::InvalidInput("guide and carrier periods must be distinct and positive".into()));
    }
    if !(0.0..1.0).contains(&r_max) {
        return Err(Error::InvalidInput(format!("r_max {r_max} outside [0, 1)")));
    }
    if r_max > 0.0 && steps == 0 {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let sys = System { n, m };
    let start = sys.eval(center, ZERO)?;
    if norm2(start.f) > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "center residuals ({:e}, {:e}) exceed 1e-9",
            start.f[0].norm(),
            start.f[1].norm()
        )));
    }
    let (mut lambda, first) = match sys.correct(*center, ZERO)? {
        Correction::Converged(l, ev) => (l, ev),
        Correction::Failed => (*center, start),
    };
    check_region(&first, ZERO)?;
    let mut samples = vec![sample(ZERO, lambda, &first)];
    let mut halvings = 0;
    let dir = Complex64::from_polar(1.0, ray_angle);
    let mut t = ZERO;
    for k in 1..=steps {
        let target = dir * (r_max * k as f64 / steps as f64);
        let mut step = target - t;
        let mut local = 0;
        loop {
            let remaining = target - t;
            let dt = if step.norm() >= remaining.norm() { remaining } else { step };
            // tangent predictor: J dlambda = (1, 0) dt
            let j = sys.checked_jacobian(&lambda, t)?;
            let tangent = solve(&j, [ONE, ZERO]);
            let guess = ModuliPoint::new(lambda.l1 + tangent[0] * dt, lambda.l2 + tangent[1] * dt);
            match sys.correct(guess, t + dt)? {
                Correction::Converged(l, ev) if ev.roots_in_disc == 1 => {
                    t += dt;
                    lambda = l;
                    if (t - target).norm() <= 1e-15 {
                        t = target;
                        check_region(&ev, t)?;
                        samples.push(sample(t, lambda, &ev));
                        break;
                    }
                }
                Correction::Converged(_, ev) if local >= MAX_HALVINGS => {
                    return Err(Error::LeftGuideRegion {
                        roots_in_disc: ev.roots_in_disc,
                        t: t + dt,
                    });
                }
                _ if local >= MAX_HALVINGS => return Err(Error::StepCollapse { t }),
                _ => {
                    step = dt / 2.0;
                    local += 1;
                    halvings += 1;
                }
            }
        }
    }
    Ok(GuidedDisc {
        n,
        m,
        center: *center,
        ray_angle,
        samples,
        halvings,
    })
}

fn check_region(ev: &Evaluation, t: Complex64) -> Result<()> {
    if ev.roots_in_disc != 1 {
        return Err(Error::LeftGuideRegion {
            roots_in_disc: ev.roots_in_disc,
            t,
        });
    }
    Ok(())
}

/// Smallest `|lambda_i(t) - lambda_j(t)|` over discs `i < j` and `t_samples`
/// common parameters, with the pair attaining it.
pub fn disjointness(discs: &[GuidedDisc], t_samples: usize) -> Result<(f64, (usize, usize))> {
    if discs.len() < 2 {
        return Err(Error::InvalidInput("need at least two discs".into()));
    }
    if discs.iter().any(|d| d.n != discs[0].n) {
        return Err(Error::InvalidInput("discs must share the guide period".into()));
    }
    for i in 0..discs.len() {
        for j in (i + 1)..discs.len() {
            if discs[i] == discs[j] {
                return Err(Error::InvalidInput(format!("discs {i} and {j} are the same disc")));
            }
        }
    }
    let len = discs[0].samples.len();
    if t_samples < 2 || len < t_samples {
        return Err(Error::InvalidInput(format!("{t_samples} t-samples requested from discs of {len}")));
    }
    let idx: Vec<usize> = (0..t_samples)
        .map(|k| ((k as f64) * (len - 1) as f64 / (t_samples - 1) as f64).round() as usize)
        .collect();
    for d in discs {
        if d.samples.len() != len || idx.iter().any(|&k| (d.samples[k].t - discs[0].samples[k].t).norm() > 1e-14) {
            return Err(Error::InvalidInput("discs are not sampled at common parameters".into()));
        }
    }
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..discs.len() {
        for j in (i + 1)..discs.len() {
            for &k in &idx {
                let dist = discs[i].samples[k].lambda.distance(&discs[j].samples[k].lambda);
                if dist < best.0 {
                    best = (dist, (i, j));
                }
            }
        }
    }
    Ok(best)
}

/// Smallest distance between `lambda(t_i)` and `lambda(t_j)`, `i != j`.
pub fn injectivity_check(disc: &GuidedDisc) -> Result<f64> {
    let s = &disc.samples;
    if s.len() < 8 {
        return Err(Error::InvalidInput(format!("injectivity needs >= 8 samples, got {}", s.len())));
    }
    let mut best = f64::INFINITY;
    for i in 0..s.len() {
        for j in (i + 1)..s.len() {
            if s[i].t == s[j].t {
                return Err(Error::InvalidInput(format!("duplicate parameter t = {}", s[i].t)));
            }
            best = best.min(s[i].lambda.distance(&s[j].lambda));
        }
    }
    Ok(best)
}

/// Complex derivative of the disc at `t = 0` along `ray_angle`, from the
/// two rays `ray_angle` and `ray_angle + pi` at radius `s`.
pub fn tangent_at_center(center: &ModuliPoint, n: u32, m: u32, ray_angle: f64, s: f64) -> Result<[Complex64; 2]> {
    let fwd = trace_disc(center, n, m, ray_angle, s, 1)?;
    let back = trace_disc(center, n, m, ray_angle + std::f64::consts::PI, s, 1)?;
    let a = fwd.samples.last().unwrap();
    let b = back.samples.last().unwrap();
    let dt = a.t - b.t;
    Ok([(a.lambda.l1 - b.lambda.l1) / dt, (a.lambda.l2 - b.lambda.l2) / dt])
}
