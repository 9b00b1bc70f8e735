#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod dimred;
pub mod error;
pub mod estimators;
pub mod models;
pub mod numerics;
pub mod rng;
pub mod training;
pub mod transport;

pub use error::{Error, Result};
