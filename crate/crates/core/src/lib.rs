//! Numerical laboratory for one-frequency quasiperiodic Schrödinger operators
//! and their finite-range symplectic dual cocycles.
//!
//! The crate is organized around the objects of the trade:
//!
//! - [`arithmetic`]: continued fractions, convergents, the Liouville exponent
//!   `β(α)` and small-divisor quality checks of the frequency.
//! - [`cocycles`]: matrix cocycles over the irrational rotation, complexified
//!   phases, and finite-volume Lyapunov spectra through re-orthonormalized
//!   transfer products.
//! - [`acceleration`]: the convex piecewise-affine profile `ε ↦ L_ε`, its
//!   quantized slopes, turning points, and type-I classification.
//! - [`duality`]: the dual finite-range cocycle, its block form and symplectic
//!   structure, dual Lyapunov spectra, domination detectors and the spectrum
//!   cross-check under duality.
//! - [`spectrum`]: truncation spectra, band spectra of rational approximants,
//!   the integrated density of states, fibered rotation numbers and gap labels.
//! - [`kotani`]: matrix m-functions through Riccati-type frames, Green
//!   matrices, the Lyapunov/Green derivative identity and reflectionless
//!   boundary residuals.
//! - [`cohomology`]: the small-divisor solver for `ψ = φ(·+α) − φ` with the
//!   quantitative truncated bounds.
//!
//! Everything is a pure function of its inputs: phase loops are data-parallel
//! (rayon behind the `parallel` feature, sequential otherwise) and reductions
//! happen in fixed phase order, so results are bit-identical for any thread
//! count.

pub mod acceleration;
pub mod arithmetic;
pub mod cocycles;
pub mod cohomology;
pub mod duality;
mod error;
pub mod kotani;
pub mod linalg;
pub mod numeric;
pub(crate) mod parallel;
pub mod spectrum;

pub use error::{QpError, Result};

/// Complex double, the scalar type of every cocycle in this crate.
pub type C64 = nalgebra::Complex<f64>;

/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dynamically sized complex vector.
pub type CVector = nalgebra::DVector<C64>;
