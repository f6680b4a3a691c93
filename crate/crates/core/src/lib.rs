#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod depth;
pub mod error;
pub mod measures;
pub mod quadrature;
pub mod quantile;
pub mod rankfield;
pub mod reconstruct;
pub mod specfun;

pub use error::{Error, Result};
