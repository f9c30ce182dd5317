//! Simulation and numerical verification toolkit for stationary and
//! self-similar symmetric α-stable random fields.

pub mod bn;
pub mod error;
pub mod extremes;
pub mod kernels;
pub mod quad;
pub mod regularity;
pub mod rng;
pub mod simulate;
pub mod stable;
pub mod stats;
pub mod window;

pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use rng::RngStream;
pub use stable::StabilityIndex;
