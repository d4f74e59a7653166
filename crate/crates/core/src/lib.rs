//! Monte Carlo simulator and analysis toolkit for a two-atom Rydberg-blockade
//! CNOT gate: exact three-level dynamics, thermal and Doppler noise, blow-away
//! readout, truth tables, Bell-state parity analysis and error budgets.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod noise;
pub mod params;
pub mod qcore;
pub mod rng;
pub mod sequence;
pub mod thermal;

pub use error::{Error, Result};
pub use params::PhysicalParams;
