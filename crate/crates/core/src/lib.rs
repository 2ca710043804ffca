//! Multicell multiuser-MIMO downlink with random beamforming under CDF-based
//! scheduling.
//!
//! The analytic side ([`analytic`], [`rate`], [`scaling`]) works from the
//! exact per-beam SINR law; the stochastic side ([`channel`], [`scheduler`])
//! simulates channel draws and the scheduler. Both consume a validated
//! [`Scenario`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants keep their published digits.
#![allow(clippy::excessive_precision)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod ks;
pub mod quad;
pub mod rate;
pub mod rng;
pub mod scaling;
pub mod scenario;
pub mod scheduler;
pub mod validation;

pub use analytic::{LevelCrossing, SinrDistribution};
pub use error::{Error, Result, Violation};
pub use scenario::{RawChannelProfile, Scenario, UserChannelProfile};
