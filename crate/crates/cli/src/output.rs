//! Run manifests, CSV files and the grayscale heatmap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::cache::Lookup;

/// Everything a run did, written as `manifest.json` in the output directory.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub inputs: Value,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub timings_ms: BTreeMap<String, f64>,
    /// Counts of numerical warnings by kind.
    pub warnings: BTreeMap<String, u64>,
    pub messages: Vec<String>,
    pub cache: Option<Lookup>,
    pub outputs: Vec<String>,
    #[serde(skip)]
    started: Instant,
}

impl Manifest {
    pub fn new(command: &str, inputs: Value) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("biflab", env!("CARGO_PKG_VERSION"));
        Manifest {
            command: command.to_string(),
            inputs,
            versions,
            timings_ms: BTreeMap::new(),
            warnings: BTreeMap::new(),
            messages: Vec::new(),
            cache: None,
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings_ms.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Records `count` occurrences of warning `kind`; zero counts are kept
    /// so the manifest lists every check that ran.
    pub fn warn(&mut self, kind: &str, count: u64) {
        *self.warnings.entry(kind.to_string()).or_default() += count;
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.timings_ms
            .insert("total".into(), self.started.elapsed().as_secs_f64() * 1e3);
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Comma-separated rows under a `#`-prefixed header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Csv {
            text: format!("# {}\n", columns.join(",")),
        }
    }

    /// Raw text, for formats that bring their own header.
    pub fn raw(text: String) -> Self {
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, dir: &Path, name: &str, manifest: &mut Manifest) -> Result<()> {
        write_file(dir, name, self.text.as_bytes(), manifest)
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Manifest) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    v.to_string()
}

/// 8-bit binary graymap (`P5`), linear from `min` (black) to `max` (white).
/// Row 0 of the image is the top row `j = ny - 1`; non-finite values are black.
pub fn heatmap_pgm(values: &[f64], nx: usize, ny: usize) -> Vec<u8> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let mut out = Vec::with_capacity(nx * ny + 32);
    let mut header = String::new();
    let _ = write!(header, "P5\n{nx} {ny}\n255\n");
    out.extend_from_slice(header.as_bytes());
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = values[j * nx + i];
            let byte = if !v.is_finite() || !(span > 0.0) {
                0
            } else {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            };
            out.push(byte);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_scaling() {
        let img = heatmap_pgm(&[0.0, 1.0, 2.0, f64::NAN], 2, 2);
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&img[..header.len()], header);
        // top row first: j = 1 holds (2, NaN)
        assert_eq!(&img[header.len()..], &[255, 0, 0, 128]);
    }

    #[test]
    fn csv_header() {
        let mut c = Csv::new(&["period", "re", "im"]);
        c.row(&["1".into(), num(0.0), num(-0.5)]);
        assert_eq!(c.as_str(), "# period,re,im\n1,0,-0.5\n");
    }
}
