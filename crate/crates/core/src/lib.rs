// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deadcore;
pub mod error;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod cli;
pub mod config;
pub mod solver;
pub mod spectrum;
pub mod verify;

mod descent;
mod init;
mod linalg;

pub use descent::TraceRow;
pub use error::{Error, Result};
pub use field::{shape_distance, sup_distance, Field};
pub use init::InitKind;
