//! Simulation of single-server processor-sharing queues with time-varying
//! arrival rates and service-rate controls that stabilize the mean response
//! time.
//!
//! The pipeline per replication: [`arrivals`] builds a nonstationary renewal
//! stream, [`engine`] runs the queue under a service rate from [`rates`] and
//! [`controls`], [`virtual_response`] probes the response time at recording
//! epochs, and [`metrics`] summarizes the ensemble. [`harness`] drives whole
//! experiment grids.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrivals;
pub mod controls;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod rates;
pub mod stream;
pub mod verify;
pub mod virtual_response;

pub use error::{Error, Result};
