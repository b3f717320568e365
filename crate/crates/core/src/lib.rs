// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arima;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nnet;
pub mod optim;
pub mod poly;
pub mod recurrent;
pub mod series;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
