//! Sequential in-network processing (INP) for the cell-free massive MIMO
//! uplink over parallel radio stripes.
//!
//! Each stripe is a serial fronthaul chain of multi-antenna APs ending at a
//! central processor. Every AP linearly combines its antenna signals with
//! the compressed signal arriving from upstream and compresses the result
//! to fit a link of `C_F` bits per channel use. The design runs one AP at a
//! time using only local CSI and side information from the predecessor.
//!
//! - [`scenario`]: geometry, correlated channels, pilot training.
//! - [`inp`]: per-AP combiner and quantizer design, stripe runner.
//! - [`hybrid`]: analog/digital factorization of a combiner.
//! - [`eval`]: rates, baselines, cutset bound, Monte-Carlo transmission.
//! - [`coordination`]: message-passing view of a stripe with overhead
//!   accounting.
//! - [`experiment`]: seeded Monte-Carlo sweeps and CSV output.
//! - [`verify`]: quick self-checks against small independent oracles.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coordination;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod hybrid;
pub mod inp;
pub mod linalg;
pub mod scenario;
pub mod verify;

pub use config::{Placement, SystemConfig};
pub use error::{Error, Result};
pub use hybrid::HybridMode;
pub use inp::{Scheme, SideInfo};
pub use scenario::Scenario;
