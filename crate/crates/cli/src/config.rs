//! Job parameters: command-line flags layered over an optional INI file.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use biflab_core::currents::Region;
use biflab_core::moduli2::normal_form;
use biflab_core::ratmap::RationalMap;
use biflab_core::{CPoly, ComplexGrid, Complex64, ModuliPoint};
use clap::Args;
use serde::Serialize;

/// Largest grid accepted, in nodes.
pub const MAX_GRID_NODES: usize = 10_000_000;

/// Every tunable of every subcommand. Unused ones are ignored.
#[derive(Args, Debug, Clone, Default, Serialize)]
pub struct Params {
    /// INI file of `key=value` lines; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Period (cycle order, center period, guide period)
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Carrier period for `trace`
    #[arg(long, global = true)]
    pub m: Option<u32>,
    /// Largest period for `counts`
    #[arg(long, global = true)]
    pub nmax: Option<u32>,
    /// Multiplier `RE[,IM]`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Fixed-point multiplier of the `Per_1` slice, `RE[,IM]`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// Map: `z2`, `z3`, `zD`, `cheb`, `c=RE,IM` or `lambda=A,B,C,D`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub map: Option<String>,
    /// `cycles`, `green` or `mc`
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Exact-period cycles only
    #[arg(long, global = true)]
    pub exact: bool,
    /// Slice grid `x0,y0,h,nx,ny`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Region `re_min,re_max,im_min,im_max`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Field for `grid-bif`: `L`, `Ln0` or `Ln`
    #[arg(long, global = true)]
    pub field: Option<String>,
    /// Number of theta samples
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Center `c` of `z^2 + c`, `RE[,IM]`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// Ray angle in radians
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ray: Option<f64>,
    /// Test circle radius for `levin`
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub rmax: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cache directory; `BIFLAB_CACHE` overrides it
    #[arg(long, global = true, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Identity tolerance for periodic points
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

/// `argv` with the config file's settings spliced in right after the
/// program name, so that later command-line flags override them.
pub fn expand_argv(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::with_capacity(argv.len() + 8);
    out.push(argv[0].clone());
    out.extend(ini_args(&text)?);
    out.extend(argv.into_iter().skip(1));
    Ok(out)
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// `key=value` lines to `--key value`. Blank lines, `#`/`;` comments and
/// `[section]` headers are skipped.
pub fn ini_args(text: &str) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", lineno + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            bail!("config line {}: nested config files are not supported", lineno + 1);
        }
        if key == "exact" {
            match value {
                "true" | "1" | "yes" => args.push(OsString::from("--exact")),
                "false" | "0" | "no" => {}
                _ => bail!("config line {}: exact must be true or false", lineno + 1),
            }
            continue;
        }
        args.push(OsString::from(format!("--{key}")));
        args.push(OsString::from(value));
    }
    Ok(args)
}

pub fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().with_context(|| format!("bad number {p:?} in {s:?}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => bail!("expected RE or RE,IM, got {s:?}"),
    };
    if !z.is_finite() {
        bail!("{s:?} is not finite");
    }
    Ok(z)
}

fn parse_floats(s: &str, count: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad {what} {s:?}"))?;
    if vals.len() != count || vals.iter().any(|v| !v.is_finite()) {
        bail!("{what} needs {count} finite comma-separated numbers, got {s:?}");
    }
    Ok(vals)
}

pub fn parse_grid(s: &str) -> Result<ComplexGrid> {
    let v = parse_floats(s, 5, "grid")?;
    let (nx, ny) = (v[3], v[4]);
    if nx.fract() != 0.0 || ny.fract() != 0.0 || nx < 3.0 || ny < 3.0 {
        bail!("grid sizes must be integers >= 3, got {s:?}");
    }
    let (nx, ny) = (nx as usize, ny as usize);
    if nx.saturating_mul(ny) > MAX_GRID_NODES {
        bail!("grid {nx}x{ny} exceeds {MAX_GRID_NODES} nodes");
    }
    if !(v[2] > 0.0) {
        bail!("grid spacing must be positive, got {}", v[2]);
    }
    Ok(ComplexGrid::new(Complex64::new(v[0], v[1]), v[2], nx, ny)?)
}

pub fn parse_region(s: &str) -> Result<Region> {
    let v = parse_floats(s, 4, "region")?;
    if !(v[0] < v[1] && v[2] < v[3]) {
        bail!("region needs re_min < re_max and im_min < im_max, got {s:?}");
    }
    Ok(Region::new(v[0], v[1], v[2], v[3]))
}

/// Grid covering `region` with margin `margin`, spacing `h`.
pub fn grid_around(region: &Region, margin: f64, h: f64) -> Result<ComplexGrid> {
    let nx = ((region.re_max - region.re_min + 2.0 * margin) / h).round() as usize + 1;
    let ny = ((region.im_max - region.im_min + 2.0 * margin) / h).round() as usize + 1;
    Ok(ComplexGrid::new(
        Complex64::new(region.re_min - margin, region.im_min - margin),
        h,
        nx,
        ny,
    )?)
}

/// A parsed `--map` value.
#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    Power(usize),
    Quadratic(Complex64),
    Moduli(ModuliPoint),
}

impl MapSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "cheb" {
            return Ok(MapSpec::Quadratic(Complex64::new(-2.0, 0.0)));
        }
        if let Some(c) = s.strip_prefix("c=") {
            return Ok(MapSpec::Quadratic(parse_complex(c)?));
        }
        if let Some(l) = s.strip_prefix("lambda=") {
            let v = parse_floats(l, 4, "lambda")?;
            return Ok(MapSpec::Moduli(ModuliPoint::new(
                Complex64::new(v[0], v[1]),
                Complex64::new(v[2], v[3]),
            )));
        }
        if let Some(d) = s.strip_prefix('z') {
            let d: usize = d.parse().with_context(|| format!("bad power map {s:?}"))?;
            if !(2..=16).contains(&d) {
                bail!("power map degree {d} outside 2..=16");
            }
            return Ok(MapSpec::Power(d));
        }
        bail!("unknown map {s:?}; expected z2, z3, zD, cheb, c=RE,IM or lambda=A,B,C,D")
    }

    pub fn build(&self) -> Result<RationalMap> {
        Ok(match self {
            MapSpec::Power(d) => RationalMap::power(*d)?,
            MapSpec::Quadratic(c) => RationalMap::quadratic(*c),
            MapSpec::Moduli(l) => normal_form(l)?,
        })
    }

    /// `c` when the map is `z^2 + c`.
    pub fn quadratic_parameter(&self) -> Option<Complex64> {
        match self {
            MapSpec::Power(2) => Some(Complex64::new(0.0, 0.0)),
            MapSpec::Quadratic(c) => Some(*c),
            _ => None,
        }
    }
}

/// Coefficients identifying a map in cache keys.
pub fn map_key(f: &RationalMap) -> (Vec<Complex64>, Vec<Complex64>) {
    let num: &CPoly = f.numerator();
    let den: &CPoly = f.denominator();
    (num.coeffs().to_vec(), den.coeffs().to_vec())
}

pub fn ensure_positive(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive, got {v}");
    }
    Ok(v)
}

pub fn out_dir(params: &Params) -> PathBuf {
    params.out.clone().unwrap_or_else(|| PathBuf::from("biflab-out"))
}

/// `BIFLAB_CACHE`, then `--cache`; `None` disables caching.
pub fn cache_dir(params: &Params) -> Option<PathBuf> {
    std::env::var_os("BIFLAB_CACHE")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| params.cache.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_lines() {
        let args = ini_args("# comment\n[job]\nn = 4\nexact=true\nseed=3\n\n").unwrap();
        let args: Vec<String> = args.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(args, ["--n", "4", "--exact", "--seed", "3"]);
        assert!(ini_args("n 4").is_err());
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_complex("0.5,-1").unwrap(), Complex64::new(0.5, -1.0));
        assert_eq!(parse_complex("-2").unwrap(), Complex64::new(-2.0, 0.0));
        assert!(parse_complex("a").is_err());
        let g = parse_grid("-2.5,-1.5,0.01,350,300").unwrap();
        assert_eq!((g.nx, g.ny), (350, 300));
        assert!(parse_grid("0,0,0.1,5000,5000").is_err());
        assert!(parse_grid("0,0,-0.1,5,5").is_err());
        assert!(parse_region("1,0,0,1").is_err());
        assert_eq!(MapSpec::parse("cheb").unwrap(), MapSpec::Quadratic(Complex64::new(-2.0, 0.0)));
        assert_eq!(MapSpec::parse("z3").unwrap(), MapSpec::Power(3));
        assert!(MapSpec::parse("w2").is_err());
    }
}
