//! Envelope-theorem diagnostics, payment synthesis and screening checks on
//! uniform type grids, plus Blackwell-order tooling for selling
//! information.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blackwell;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod info_market;
pub mod scenario;
pub mod screening;
pub mod synthesis;

mod simplex;

pub use error::{Error, Result};
pub use grid::{GridFn, Tolerance};
