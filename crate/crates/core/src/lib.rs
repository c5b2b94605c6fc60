//! Weighted Bergman spaces on the disk and bidisk, and the quantitative
//! extension experiments built on them.

pub mod bergman;
pub mod error;
pub mod extension;
pub mod functionals;
pub mod harness;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
