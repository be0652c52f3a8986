//! Random unitarily embedded tensor-network states, their gradient statistics,
//! and the spin-model / directed-polyomino machinery used to bound them.

pub mod bounds;
pub mod error;
pub mod gradient;
pub mod haar;
pub mod network;
pub mod polyomino;
pub mod spin;
pub mod state;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
