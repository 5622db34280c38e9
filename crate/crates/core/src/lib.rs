//! Compound real options valuation of a PV-battery investment against a
//! diesel alternative, by least-squares Monte Carlo.
//!
//! The pipeline is: calibrate stochastic processes from history, simulate
//! demand, diesel price and PV-battery cost paths, turn them into exercise
//! payoffs, and value deferral and expansion by backward induction.

pub mod calibrate;
pub mod cashflow;
pub mod config;
pub mod error;
pub mod lsmc;
pub mod processes;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
