//! Latency-constrained computation offloading over multiple mmWave links.
//!
//! A user splits an offloading payload across several access points. The crate
//! covers the minimum-power rate split, how many links are worth using under
//! random deployments, blockage-aware power overprovisioning, and erasure
//! coding across links.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocking;
pub mod channel;
pub mod erasure;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod multilink;
pub mod overprovision;
pub mod rng;

pub use channel::{ChannelSet, FriisParams, OffloadTask};
pub use error::{OffloadError, Result};
pub use multilink::{allocate, optimal_link_count, AllocationPlan};
