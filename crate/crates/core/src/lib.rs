//! Generalized Darboux transformations for time-dependent Hamiltonians with a
//! time-dependent mass and a term linear in momentum.
//!
//! The crate builds the closed-form wavefunctions of the generalized harmonic
//! oscillator and of the inverse-square system, applies one- and two-fold
//! transformations to them, and checks every identity numerically.

pub mod classical;
pub mod darboux;
pub mod error;
pub mod jet;
mod par;
pub mod pipeline;
pub mod quadrature;
pub mod scenario;
pub mod specfun;
pub mod states;
pub mod system;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
