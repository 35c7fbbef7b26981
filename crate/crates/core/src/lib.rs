//! Self-normalized kernel tests for dependent data: goodness of fit,
//! change point detection and independence of time series.

pub mod baseline;
pub mod changepoint;
pub mod dgp;
pub mod embedding;
pub mod error;
pub mod gof;
pub mod independence;
pub mod kernels;
pub mod limitdist;
pub mod rng;
pub mod selfnorm;
pub mod series;
pub mod studies;

pub use error::{Error, Result};
