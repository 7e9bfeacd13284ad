//! Numerical core for simulating high-dimensional prepare-and-measure QKD
//! with self-healing Bessel-Gaussian vector modes.

pub mod bessel;
pub mod channel;
pub mod error;
pub mod fft;
pub mod field;
pub mod healing;
pub mod io;
pub mod jones;
pub mod modes;
pub mod propagation;
pub mod security;

pub use error::{Error, Result};
