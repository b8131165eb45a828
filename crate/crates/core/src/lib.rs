#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod continuation;
pub mod eigensolver;
pub mod error;
pub mod fixedpoint;
pub mod gn;
pub mod io;
pub mod linalg;
pub mod model;
pub mod symmetric;

pub use error::{Error, Result};
