//! Redfield and Davies quantum master equations for quadratic (particle-number
//! conserving) systems whose sites are coupled to identical, independent
//! thermal baths.
//!
//! The crate is organised bottom-up:
//!
//! * [`bath`]: spectral functions of the baths (rates, Lamb-shift integrals,
//!   KMS structure).
//! * [`hamiltonians`]: quadratic hopping matrices, their eigenmodes, random
//!   ensembles and drive protocols.
//! * [`generators`]: Redfield, Davies and secular-truncated generators stored
//!   in mode-pair coefficient form, for linear (exchange) dissipation on the
//!   fermionic Fock space and for number-conserving dephasing in the
//!   single-particle sector.
//! * [`dynamics`]: fixed-step RK4 propagation, Gibbs states, trace distance.
//! * [`certify`]: numerical certificates for equivalence, detailed balance,
//!   complete positivity and stationarity.
//! * [`harness`]: seeded disorder ensembles, CSV/SVG reporting.

pub mod bath;
pub mod certify;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod generators;
pub mod hamiltonians;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};

/// Version of the ensemble configuration schema understood by this build.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Crate version baked in at compile time.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
