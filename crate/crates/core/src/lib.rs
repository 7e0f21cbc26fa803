//! Analog beamformer design and capacity evaluation for hybrid beamforming
//! with selection (HBwS).
//!
//! A transmitter with HBwS feeds its antenna array through an `N x L` analog
//! beamformer whose `L` input ports are connected to `K < L` up-conversion
//! chains by a bank of switches. The beamformer tracks channel statistics
//! only; the switches pick the best `K` ports for every channel realization.
//!
//! The crate is organised by concern:
//!
//! * [`grassmann`]: subspace distances, orthonormalization, Stiefel sampling
//!   and Grassmannian line packing.
//! * [`switchset`]: switch-position families (full, banked and the
//!   bounded-overlap Frankl-Babai construction).
//! * [`channel`]: Kronecker channel statistics, PAS-integrated transmit
//!   correlation and channel sampling.
//! * [`beamformer`]: reduced-dimensional beamformer design and refinement.
//! * [`capacity`]: per-realization and ergodic sum-capacity evaluation,
//!   baselines and overhead accounting.
//! * [`bounds`]: closed-form and Monte Carlo lower bounds.
//! * [`experiments`]: configuration-driven parameter sweeps and CSV output.

pub mod beamformer;
pub mod bounds;
pub mod capacity;
pub mod channel;
pub mod dump;
pub mod error;
pub mod experiments;
pub mod grassmann;
pub mod linalg;
pub mod rng;
pub mod stats;
pub mod switchset;

pub use beamformer::RdBeamformer;
pub use error::{Error, Result};
pub use grassmann::{Angle, SemiUnitary};
pub use linalg::CMat;
pub use stats::{CapacityEstimate, LogBase, McOptions};
pub use switchset::SwitchFamily;
