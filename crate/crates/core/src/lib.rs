//! Spectral analysis of first-order `2 x 2` boundary value problems
//! `-i B^{-1} y' + Q(x) y = lambda y`, `C y(0) + D y(1) = 0`, with complex diagonal `B`.

pub mod chardet;
pub mod classify;
pub mod cli;
pub mod error;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod probe;
pub mod resolvent;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64;
