//! Numerical laboratory for the porous-medium-type equation
//! `u_t = u M(D^2 u) + b |Du|^2` with `M` a Pucci extremal operator.

pub mod abp;
pub mod cli;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod oscillation;
pub mod paraboloid;
pub mod pucci;
pub mod refsol;
pub mod scheme;

pub use error::{Error, Result};
