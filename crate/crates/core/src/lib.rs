//! Phonon-number moments and motional quadratures of trapped ions from the
//! initial time derivative of the excited-state population.
//!
//! The crate simulates the full measurement chain on a truncated Fock
//! space: nonlinear carrier/sideband couplings ([`couplings`]), laser-weight
//! engineering of their Taylor series ([`engineering`]), exact
//! interaction-picture dynamics ([`dynamics`]), the measurement recipes
//! ([`protocols`]), the N-ion collective readout ([`multi_ion`]) and
//! moment-to-distribution inversion ([`reconstruction`]). The [`cli`]
//! module drives all of it from JSON scenario files.

pub mod cli;
pub mod couplings;
pub mod dynamics;
pub mod engineering;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod multi_ion;
pub mod protocols;
pub mod reconstruction;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
