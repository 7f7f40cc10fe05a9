//! Secure integrated-sensing-and-communication transmit design.
//!
//! The crate models a multi-antenna transmitter that simultaneously senses a
//! target and serves communication users, where the sensed target is treated
//! as a potential eavesdropper of the embedded data. It provides:
//!
//! * [`array`] — uniform linear array, steering vectors, channels, transmit
//!   beampatterns and sensing templates;
//! * [`conic`] — a small dense conic optimizer (zero / nonnegative /
//!   second-order / PSD cones) with a bisection driver;
//! * [`secure`] — secrecy-constrained joint radar-communication beamforming
//!   via semidefinite relaxation and eavesdropper-SINR level search;
//! * [`robust`] — the same design under target-angle uncertainty and bounded
//!   or Gaussian channel-state error;
//! * [`precoding`] — symbol-level precoding that places legitimate users in
//!   constructive-interference regions and the eavesdropper in destructive
//!   ones;
//! * [`eval`] — seeded Monte-Carlo harness (symbol error rates, secrecy-rate
//!   sweeps, beampattern exports);
//! * [`config`] — strict scenario config parsing and canonical serialization.

pub mod array;
pub mod artifacts;
pub mod config;
pub mod conic;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod precoding;
pub mod rng;
pub mod robust;
pub mod secure;

pub use array::{AngleInterval, ArrayGeometry, ChannelSet, FadingModel, TargetRegion};
pub use conic::{Cone, ConicProgram, ConicSolution, SolveStatus};
pub use error::{Error, Result};
pub use linalg::{ComplexVector, HermitianMatrix};
pub use precoding::{PrecodedSlot, PskConstellation, PskFrame};
pub use robust::{CsiErrorModel, RobustReport};
pub use secure::{BeamformerDesign, Scenario};
