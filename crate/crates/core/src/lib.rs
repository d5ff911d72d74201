//! Event-triggered safety for impulsive and intermittent control.
//!
//! The crate simulates a satellite kept inside an orbital range by
//! impulsive burns scheduled from a barrier function, and a planar system
//! whose safety filter is switched on and off by triggers.
//!
//! Modules, bottom up:
//!
//! * [`numerics`]: RK4 propagation with zero-crossing location
//! * [`dynamics`]: two-body field, impulses, disturbances
//! * [`barrier`]: barrier functions and trigger conditions
//! * [`filter`]: closed-form halfspace safety filter
//! * [`orbital`]: Keplerian elements and the safeguarding controller
//! * [`taumodel`]: sampled and fitted expected inter-event time
//! * [`scenario`]: run configurations
//! * [`engine`]: hybrid simulation loops and audits

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod filter;
pub mod numerics;
pub mod orbital;
pub mod scenario;
pub mod taumodel;

pub use error::{Error, Result};
