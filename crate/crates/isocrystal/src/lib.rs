//! Exact computations with latticed F-isocrystals over finite fields at
//! truncated p-adic precision.

pub mod bounds;
pub mod crystal;
pub mod deviation;
pub mod error;
pub mod io;
pub mod plinalg;
pub mod semilinear;
pub mod stairs;
pub mod truncation;
pub mod verify;
pub mod witt;

pub use error::{Error, Result};
