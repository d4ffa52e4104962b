#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod net;
pub mod road;
pub mod seed;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
