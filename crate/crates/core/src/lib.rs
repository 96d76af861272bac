pub mod cli;
pub mod errmodel;
pub mod error;
pub mod gemm;
pub mod halffp;
pub mod matrix;
pub mod pipesim;
pub mod planner;
pub mod rng;
pub mod sgcm;
pub mod split;

pub use error::{Error, Result};
pub use halffp::Half;
pub use matrix::Matrix;
