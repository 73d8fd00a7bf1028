//! Simulation toolkit for a one-dimensional bosonic quantum battery that is
//! charged by a single particle in a harmonic trap through a sudden quench of
//! a contact interaction.
//!
//! Units are natural oscillator units of the battery trap: `ħ = m = ω_B = 1`,
//! although most routines accept a general `ω_B`.
//!
//! Layout:
//!
//! * [`basis`]: oscillator eigenfunctions, bosonic Fock states and the
//!   parity-reduced battery ⊗ charger product basis.
//! * [`integrals`]: one-body energies, contact integrals and the overlaps used
//!   by the two-level model.
//! * [`hamiltonian`]: second-quantized matrices `H0`, `Hint`, `H1` and the
//!   battery-only Hamiltonian.
//! * [`dynamics`]: spectral time evolution and expectation values.
//! * [`thermo`]: reduced battery state, ergotropy, entropy, work, power and
//!   quantum speed limit.
//! * [`tlm`]: the analytical two-level model and resonance conditions.
//! * [`experiments`]: parameter scans and resonance fine-tuning.

extern crate openblas_src;

pub mod basis;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod integrals;
pub mod io;
pub mod linalg;
pub mod thermo;
pub mod tlm;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;
