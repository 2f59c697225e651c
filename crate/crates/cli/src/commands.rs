//! One function per subcommand. Each resolves its parameters, runs the
//! computation, writes CSV files and fills in the manifest.

use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use biflab_core::currents::{discrete_ddc, field_eval, theta_average_mass, FieldKind};
use biflab_core::lyapunov::{lyap_from_points, lyap_from_spectrum, lyap_green_quadratic_poly, lyap_mc};
use biflab_core::mandelbrot::{center_measure, center_poly, potential_gap, MAX_CENTER_PERIOD};
use biflab_core::moduli2::{count_table, per_curve_samples, Slice};
use biflab_core::motion::trace_disc;
use biflab_core::ratmap::{CycleSpectrum, PeriodicPoint, IDENTITY_TOL};
use biflab_core::{Complex64, LyapEstimate, ModuliPoint};
use serde_json::json;

use crate::cache::Cache;
use crate::config::{
    ensure_positive, grid_around, map_key, parse_complex, parse_grid, parse_region, MapSpec, Params,
};
use crate::output::{heatmap_pgm, num, Csv, Manifest};

/// Bad arguments discovered after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UsageError(format!("{e:#}")))
}

pub struct Job {
    pub params: Params,
    pub out: PathBuf,
    pub manifest: Manifest,
    pub cache: Cache,
}

impl Job {
    fn n_or(&self, default: u32) -> Result<u32> {
        let n = self.params.n.unwrap_or(default);
        if n == 0 {
            return Err(usage("--n must be positive"));
        }
        Ok(n)
    }

    fn complex_or(&self, value: &Option<String>, default: &str) -> Result<Complex64> {
        parse_complex(value.as_deref().unwrap_or(default)).map_err(usage)
    }

    fn tol(&self) -> Result<f64> {
        let tol = self.params.tol.unwrap_or(IDENTITY_TOL);
        ensure_positive("--tol", tol).map_err(usage)?;
        if tol >= 1.0 {
            return Err(usage("--tol must be below 1"));
        }
        Ok(tol)
    }

    fn slice(&self) -> Result<Slice> {
        Ok(match &self.params.eta {
            Some(eta) => Slice::per1(parse_complex(eta).map_err(usage)?),
            None => Slice::polynomial_line(),
        })
    }

    fn record_cache(&mut self, lookup: crate::cache::Lookup) {
        self.manifest.cache = Some(lookup);
        self.manifest.warn("cache_evictions", self.cache.warnings.len() as u64);
        self.manifest.messages.extend(self.cache.warnings.drain(..));
    }
}

fn estimate_row(csv: &mut Csv, e: &LyapEstimate) {
    csv.row(&[e.method.name().to_string(), e.order.to_string(), num(e.value), num(e.error)]);
}

pub fn lyap(job: &mut Job) -> Result<()> {
    let spec = MapSpec::parse(job.params.map.as_deref().unwrap_or("z2")).map_err(usage)?;
    let method = job.params.method.clone().unwrap_or_else(|| "cycles".into());
    let estimate = match method.as_str() {
        "cycles" => {
            let n = job.n_or(10)?;
            let tol = job.tol()?;
            let f = spec.build()?;
            let exact = job.params.exact;
            let key = json!({
                "kind": if exact { "exact_cycles" } else { "periodic_points" },
                "map": map_key(&f),
                "n": n,
                "tol": tol,
            });
            let (estimate, lookup) = if exact {
                let (s, l): (CycleSpectrum, _) = job
                    .manifest
                    .timed("cycles", || job.cache.get_or_compute(key, || Ok(f.exact_cycles_with(n, tol)?)))?;
                (lyap_from_spectrum(f.degree(), &s), l)
            } else {
                let (p, l): (Vec<PeriodicPoint>, _) = job
                    .manifest
                    .timed("cycles", || job.cache.get_or_compute(key, || Ok(f.periodic_points(n)?)))?;
                (lyap_from_points(f.degree(), n, &p)?, l)
            };
            job.record_cache(lookup);
            estimate
        }
        "green" => {
            let c = spec
                .quadratic_parameter()
                .ok_or_else(|| usage("--method green needs a map z^2 + c (z2, cheb or c=RE,IM)"))?;
            let iters = job.params.depth.unwrap_or(400);
            if iters < 25 {
                return Err(usage("--depth (escape iterations) must be at least 25"));
            }
            lyap_green_quadratic_poly(c, iters as u32)
        }
        "mc" => {
            let f = spec.build()?;
            let samples = job.params.samples.unwrap_or(100_000);
            let depth = job.params.depth.unwrap_or(30);
            let seed = job.params.seed.unwrap_or(0);
            job.manifest.timed("monte_carlo", || lyap_mc(&f, samples, depth, seed))?
        }
        other => return Err(usage(format!("unknown method {other:?}; expected cycles, green or mc"))),
    };
    println!("{}", estimate.value);
    let mut csv = Csv::new(&["method", "order", "value", "error"]);
    estimate_row(&mut csv, &estimate);
    csv.write(&job.out, "lyap.csv", &mut job.manifest)
}

pub fn spectrum(job: &mut Job) -> Result<()> {
    let spec = MapSpec::parse(job.params.map.as_deref().unwrap_or("z2")).map_err(usage)?;
    let n = job.n_or(3)?;
    let tol = job.tol()?;
    let f = spec.build()?;
    let key = json!({"kind": "exact_cycles", "map": map_key(&f), "n": n, "tol": tol});
    let (s, lookup): (CycleSpectrum, _) = job
        .manifest
        .timed("cycles", || job.cache.get_or_compute(key, || Ok(f.exact_cycles_with(n, tol)?)))?;
    job.record_cache(lookup);
    let mut csv = Csv::new(&["cycle", "mult_re", "mult_im", "abs_mult", "stability", "point_re", "point_im"]);
    for (i, c) in s.cycles.iter().enumerate() {
        let (re, im) = match c.points.first().and_then(|p| p.to_affine()) {
            Some(z) => (num(z.re), num(z.im)),
            None => ("inf".to_string(), "inf".to_string()),
        };
        csv.row(&[
            i.to_string(),
            num(c.multiplier.re),
            num(c.multiplier.im),
            num(c.multiplier.norm()),
            format!("{:?}", c.stability).to_lowercase(),
            re,
            im,
        ]);
    }
    println!("{} cycles of exact period {n}", s.count());
    csv.write(&job.out, "spectrum.csv", &mut job.manifest)
}

fn moduli_row(csv: &mut Csv, index: usize, p: &ModuliPoint) {
    csv.row(&[index.to_string(), num(p.l1.re), num(p.l1.im), num(p.l2.re), num(p.l2.im)]);
}

pub fn percurve(job: &mut Job) -> Result<()> {
    let n = job.n_or(2)?;
    let w = job.complex_or(&job.params.w, "0")?;
    let eta = job.complex_or(&job.params.eta, "0")?;
    if !(w.norm() < 1.0 && eta.norm() < 1.0) {
        return Err(usage("--w and --eta must lie in the open unit disc"));
    }
    let points = job.manifest.timed("per_curve", || per_curve_samples(n, w, eta))?;
    let mut csv = Csv::new(&["index", "l1_re", "l1_im", "l2_re", "l2_im"]);
    for (i, p) in points.iter().enumerate() {
        moduli_row(&mut csv, i, p);
    }
    print!("{}", csv.as_str());
    csv.write(&job.out, "percurve.csv", &mut job.manifest)
}

pub fn centers(job: &mut Job) -> Result<()> {
    let n = job.n_or(3)?;
    if n > MAX_CENTER_PERIOD {
        return Err(usage(format!("--n must be at most {MAX_CENTER_PERIOD}")));
    }
    let set = job.manifest.timed("centers", || center_poly(n))?;
    let mut csv = Csv::new(&["period", "re", "im"]);
    for c in &set.centers {
        csv.row(&[n.to_string(), num(c.re), num(c.im)]);
    }
    println!("{} centers of exact period {n}", set.count());
    csv.write(&job.out, "centers.csv", &mut job.manifest)
}

pub fn counts(job: &mut Job) -> Result<()> {
    let nmax = job.params.nmax.unwrap_or(10);
    if !(1..=62).contains(&nmax) {
        return Err(usage("--nmax must lie in 1..=62"));
    }
    let table = count_table(nmax);
    let mut csv = Csv::new(&["n", "nu2", "N2"]);
    for n in 1..=nmax {
        println!("{n} {} {}", table.nu2(n), table.n2(n));
        csv.row(&[n.to_string(), table.nu2(n).to_string(), table.n2(n).to_string()]);
    }
    csv.write(&job.out, "counts.csv", &mut job.manifest)
}

fn field_kind(s: &str) -> Result<FieldKind> {
    match s {
        "L" => Ok(FieldKind::L),
        "Ln0" => Ok(FieldKind::Ln0),
        "Ln" => Ok(FieldKind::Ln),
        other => Err(usage(format!("unknown field {other:?}; expected L, Ln0 or Ln"))),
    }
}

pub fn grid_bif(job: &mut Job) -> Result<()> {
    let grid = parse_grid(job.params.grid.as_deref().unwrap_or("-2.5,-1.5,0.01,350,300")).map_err(usage)?;
    let kind = field_kind(job.params.field.as_deref().unwrap_or("L"))?;
    let n = job.n_or(10)?;
    let slice = job.slice()?;
    let field = job.manifest.timed("field", || field_eval(&slice, n, kind, &grid));
    let ddc = job.manifest.timed("ddc", || discrete_ddc(&field))?;
    job.manifest.warn("masked_nodes", field.masked_count() as u64);
    job.manifest.warn("masked_stencils", ddc.masked_stencils as u64);
    job.manifest.warn("clamped_atoms", ddc.clamped.len() as u64);

    Csv::raw(field.to_csv()).write(&job.out, "field.csv", &mut job.manifest)?;
    let mut csv = Csv::new(&["re", "im", "weight"]);
    for (z, w) in ddc.signed_atoms() {
        csv.row(&[num(z.re), num(z.im), num(*w)]);
    }
    csv.write(&job.out, "ddc.csv", &mut job.manifest)?;

    // interior nodes only; atoms come row by row
    let masses: Vec<f64> = ddc.signed_atoms().iter().map(|a| a.1).collect();
    let (w, h) = (grid.nx - 2, grid.ny - 2);
    if masses.len() == w * h {
        let img = heatmap_pgm(&masses, w, h);
        crate::output::write_file(&job.out, "ddc.pgm", &img, &mut job.manifest)?;
    } else {
        job.manifest.warn("heatmap_skipped", 1);
    }
    println!("ddc mass {}", ddc.signed_total);
    Ok(())
}

pub fn theta_avg(job: &mut Job) -> Result<()> {
    let n = job.n_or(2)?;
    let k = job.params.k.unwrap_or(64);
    let region = parse_region(job.params.region.as_deref().unwrap_or("-1.3,-0.6,-0.35,0.35")).map_err(usage)?;
    let grid = match &job.params.grid {
        Some(g) => parse_grid(g).map_err(usage)?,
        None => grid_around(&region, 0.05, 0.01)?,
    };
    let slice = job.slice()?;
    let m = job.manifest.timed("theta", || theta_average_mass(&slice, n, k, &region, &grid))?;
    job.manifest.warn("masked_nodes", m.masked as u64);
    let mut csv = Csv::new(&["n", "k", "ddc_mass", "theta_mass", "quadrature", "masked"]);
    csv.row(&[
        n.to_string(),
        k.to_string(),
        num(m.ddc_mass),
        num(m.theta_mass),
        num(m.quadrature),
        m.masked.to_string(),
    ]);
    println!("ddc mass {} theta mass {}", m.ddc_mass, m.theta_mass);
    csv.write(&job.out, "theta.csv", &mut job.manifest)
}

pub fn levin(job: &mut Job) -> Result<()> {
    let n = job.n_or(12)?;
    if n > MAX_CENTER_PERIOD {
        return Err(usage(format!("--n must be at most {MAX_CENTER_PERIOD}")));
    }
    let count = job.params.samples.unwrap_or(16);
    let radius = ensure_positive("--radius", job.params.radius.unwrap_or(3.0)).map_err(usage)?;
    if count == 0 {
        return Err(usage("--samples must be positive"));
    }
    let points: Vec<Complex64> = (0..count)
        .map(|j| Complex64::from_polar(radius, TAU * j as f64 / count as f64))
        .collect();
    let measure = job.manifest.timed("centers", || center_measure(n))?;
    let gap = potential_gap(&measure, &points)?;
    let mut m = Csv::new(&["re", "im", "weight"]);
    for (z, w) in &measure.atoms {
        m.row(&[num(z.re), num(z.im), num(*w)]);
    }
    m.write(&job.out, "measure.csv", &mut job.manifest)?;
    let mut csv = Csv::new(&["n", "radius", "points", "gap"]);
    csv.row(&[n.to_string(), num(radius), count.to_string(), num(gap)]);
    println!("{gap}");
    csv.write(&job.out, "levin.csv", &mut job.manifest)
}

pub fn trace(job: &mut Job) -> Result<()> {
    let n = job.n_or(1)?;
    let m = job.params.m.unwrap_or(2);
    let center = match (&job.params.c, &job.params.map) {
        (Some(c), _) => ModuliPoint::quadratic_polynomial(parse_complex(c).map_err(usage)?),
        (None, Some(map)) => match MapSpec::parse(map).map_err(usage)? {
            MapSpec::Moduli(l) => l,
            other => match other.quadratic_parameter() {
                Some(c) => ModuliPoint::quadratic_polynomial(c),
                None => return Err(usage("trace needs --c or a quadratic/lambda --map")),
            },
        },
        (None, None) => ModuliPoint::quadratic_polynomial(Complex64::new(-1.0, 0.0)),
    };
    let ray = job.params.ray.unwrap_or(0.0);
    let rmax = job.params.rmax.unwrap_or(0.9);
    let steps = job.params.steps.unwrap_or(64);
    let disc = job.manifest.timed("trace", || trace_disc(&center, n, m, ray, rmax, steps))?;
    job.manifest.warn("halved_steps", disc.halvings as u64);
    let mut csv = Csv::new(&["t_re", "t_im", "l1_re", "l1_im", "l2_re", "l2_im", "res_n", "res_m"]);
    for s in &disc.samples {
        csv.row(&[
            num(s.t.re),
            num(s.t.im),
            num(s.lambda.l1.re),
            num(s.lambda.l1.im),
            num(s.lambda.l2.re),
            num(s.lambda.l2.im),
            num(s.res_n),
            num(s.res_m),
        ]);
    }
    println!("{} samples, max residual {:e}", disc.samples.len(), disc.max_residual());
    csv.write(&job.out, "disc.csv", &mut job.manifest)
}
