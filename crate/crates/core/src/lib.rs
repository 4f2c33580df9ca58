//! Shortcut-to-adiabaticity pulse synthesis and simulation of single-excitation
//! state transfer between two optomechanical interfaces joined by a waveguide.
//!
//! All rates are in units of the peak coupling g₀ and all times in 1/g₀.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod frame;
pub mod hamiltonian;
pub mod integrate;
pub mod protocol;
pub mod pulse;
pub mod state;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
