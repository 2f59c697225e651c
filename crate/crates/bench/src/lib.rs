//! Fixtures shared by the kernel benchmarks.

use biflab_core::{CPoly, Complex64};

/// The basilica `z^2 - 1`.
pub const BASILICA: Complex64 = Complex64::new(-1.0, 0.0);

/// A degree-`d` polynomial with coefficients spread over the unit circle,
/// reproducible without an RNG.
pub fn spread_poly(d: usize) -> CPoly {
    let coeffs = (0..=d)
        .map(|k| Complex64::from_polar(1.0 + (k % 3) as f64, 2.399_963 * k as f64))
        .collect();
    CPoly::new(coeffs)
}
