//! Day-ahead battery dispatch against coincident-peak and demand charges.

pub mod benchmark;
pub mod error;
pub mod ingest;
pub mod milpsolve;
pub mod model;
pub mod peakprob;
pub mod pipeline;
pub mod pvforecast;
pub mod scengen;
pub mod schedopt;
pub mod settle;

pub use error::{Error, Result};
