#![allow(dead_code)]

pub mod gradcheck;
pub mod riemann;
pub mod sod;
