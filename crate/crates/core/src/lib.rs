#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charfn;
pub mod cli;
pub mod chebyshev;
pub mod domain;
pub mod error;
pub mod eval;
pub mod isofamily;
pub mod linalg;
pub mod quadrature;
pub mod series;
pub mod solver;
pub mod spectrum;

pub use domain::{
    eval_potential, make_delay_config, DelayConfig, PiecewiseFunction, PotentialPair, Segment,
    Shape,
};
pub use error::{Error, Result};
pub use linalg::{CVec2, Mat2, C64};
