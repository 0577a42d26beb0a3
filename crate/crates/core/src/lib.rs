//! Guaranteed set-membership state estimation and cooperative perception.
//!
//! Road users are tracked with zonotopes that provably contain the true state
//! as long as process and measurement noise stay inside their bounds. Remote
//! stations share their perception as collaborative perception messages over
//! a simulated V2X channel, and the ego vehicle fuses the estimate sets of all
//! sources into a scene map.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod awareness;
pub mod estimator;
pub mod frames;
pub mod sim;
pub mod wire;
pub mod zonoset;
