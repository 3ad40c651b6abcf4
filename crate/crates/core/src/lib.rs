//! Cardiac cell models with stiff integration, equilibrium and limit-cycle
//! continuation, chaos and EAD diagnostics, and 1D cable simulation.

pub mod continuation;
pub mod cable;
pub mod cycles;
pub mod diagnostics;
pub mod equilibria;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
