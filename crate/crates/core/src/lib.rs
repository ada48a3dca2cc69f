//! Thermodynamic formalism for polynomial Julia sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod family;
pub mod motion;
pub mod par;
pub mod poly;
pub mod pressure;
pub mod roots;
pub mod spatial;
pub mod tower;
pub mod transfer;
pub mod wpmetric;

pub use error::{Error, Result};

/// Complex double.
pub type C64 = num_complex::Complex64;

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
