//! Majorization and entropy numerics for probability vectors, density
//! matrices and quantum channels.
//!
//! - [`sequence`]: probability vectors, the majorization preorder `a ≺ b`,
//!   Shannon entropy.
//! - [`transfer`]: constructive certificates of `a ≺ b` (T-transform chains,
//!   doubly stochastic and orthostochastic matrices, Birkhoff decompositions).
//! - [`state`]: density matrices, spectra, von Neumann entropy, trace distance,
//!   Ky Fan sums.
//! - [`channel`]: Kraus channels, the channels realizing `ρ₁ ≺ ρ₂`, and the
//!   isometric-conjugation detector.
//!
//! All entropies are in bits.

#![forbid(unsafe_code)]

pub mod channel;
pub mod error;
pub mod linalg;
pub mod sequence;
pub mod state;
pub mod transfer;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;

/// Crate version, embedded in CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
