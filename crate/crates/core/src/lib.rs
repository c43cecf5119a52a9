#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod config;
pub mod contour;
pub mod evaluate;
pub mod linalg;
pub mod oracles;
pub mod problem;
pub mod spectral;
pub mod transforms;
