// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod database;
pub mod eos;
pub mod features;
pub mod hydro;
pub mod manifold;
pub mod neural;
pub mod radiography;
