//! Desk-scale benchmarking of zone-temperature controllers.
//!
//! The crate wires together:
//!
//! - a synthetic building data generator and trajectory pipeline ([`data`]),
//! - a learned two-component thermal model that stays exactly linear in the
//!   control input ([`pcnn`]),
//! - an episodic control environment with comfort bounds and measurement
//!   noise ([`env`]),
//! - a twin-critic deterministic-policy agent plus two rule-based
//!   controllers ([`agents`]),
//! - a clairvoyant linear-programming optimum used as the reference
//!   controller ([`oracle`]),
//! - and the experiment harness behind the `zonebench` CLI ([`bench`]).

pub mod error;
pub mod linalg;
pub mod data;
pub mod neural;
pub mod pcnn;

pub use error::{Error, Result};
