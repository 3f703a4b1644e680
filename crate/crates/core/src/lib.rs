//! Off-the-grid blind deconvolution and demixing.
//!
//! Several users each push a short message through a codebook and an unknown
//! sparse multipath channel; the receiver sees one frequency-domain vector
//! holding the sum of all contributions. This crate recovers the continuous
//! path delays of every user and the magnitudes of the encoded messages from
//! that single vector:
//!
//! * [`model`] holds the sampled signal model and the lifting operator,
//! * [`solver`] solves the dual semidefinite program by operator splitting,
//! * [`recovery`] turns the dual vector into delays (dual polynomial roots or
//!   grid search) and messages (least squares plus rank-1 consolidation),
//! * [`certificate`] builds the interpolating dual certificate directly,
//!   without an SDP, to check whether an instance is exactly recoverable,
//! * [`oracle`] provides brute-force references for small instances.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature to
//! let the linear algebra backend use runtime SIMD detection.

#![no_std]

extern crate alloc;

pub mod certificate;
mod error;
pub mod model;
pub mod oracle;
pub mod recovery;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Channel, Codebook, GridSpec, LiftedTuple, Measurement, Message, Path};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix (column-major).
pub type CMat = faer::Mat<C64>;
