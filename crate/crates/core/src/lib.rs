//! Numerical core of biflab: roots, rational maps, Lyapunov exponents, the
//! quadratic moduli space, bifurcation currents, Mandelbrot centers and
//! holomorphic motions of hyperbolic components.

pub mod currents;
pub mod error;
pub mod lyapunov;
pub mod mandelbrot;
pub mod moduli2;
pub mod motion;
pub mod polyroot;
pub mod ratmap;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use motion::{DiscSample, GuidedDisc};
pub use polyroot::{roots, CPoly, Root};
pub use currents::{ComplexGrid, DiscreteMeasure, Region, ScalarField};
pub use lyapunov::{LyapEstimate, Method};
pub use mandelbrot::CenterSet;
pub use moduli2::{ModuliPoint, MultiplierPoly, Slice};
pub use ratmap::{CycleSpectrum, HomogeneousLift, Mobius, RationalMap, SpherePoint};
