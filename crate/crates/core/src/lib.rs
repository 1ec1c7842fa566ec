//! Cycle-resolved combustion-phasing toolkit for multi-cylinder diesel engines.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`gas`] supply intake-side quantities (EGR fraction,
//!   cylinder-specific IVC pressure and temperature, polytropic compression).
//! * [`combustion`] predicts SOC, burn duration and CA50, both with the full
//!   knock integral and with the closed-form simplification used for control.
//! * [`calibration`] fits the semi-empirical coefficients by batch gradient
//!   descent and runs input-error sensitivity studies.
//! * [`control`] holds the adaptive observer controller, the feedforward SOI
//!   law and a PID baseline.
//! * [`engine`] is a synthetic six-cylinder plant that closes the loop.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod coefficients;
pub mod combustion;
pub mod control;
pub mod engine;
pub mod error;
pub mod gas;
pub mod geometry;
pub mod stats;

pub use coefficients::CoefficientSet;
pub use error::{Error, Result};
