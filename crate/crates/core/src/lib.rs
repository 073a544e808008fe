//! Simulation of a dissipative Kerr resonator with one- or two-photon
//! driving.
//!
//! The crate solves the Lindblad master equation on a truncated Fock space
//! and unravels it along single quantum trajectories under two monitoring
//! schemes:
//!
//! * photon counting with distinguishable one- and two-photon detections
//!   ([`counting`]), where the conditional state jumps between even and odd
//!   cat states;
//! * ideal homodyne detection of both loss channels ([`homodyne`]), where the
//!   conditional state diffuses and switches between coherent states of
//!   opposite phase.
//!
//! Rates and times are expressed in units of the two-photon loss rate `eta`
//! (so times are in `1/eta`), with `hbar = 1`.

pub mod analysis;
pub mod counting;
mod error;
pub mod fock;
pub mod homodyne;
pub mod master_eq;
pub mod model;
pub mod record;
pub mod rng;
pub(crate) mod stepper;

pub use error::{Error, Result};
pub use fock::{C64, DensityMatrix, Operator, Parity, StateVector};
pub use model::{Channel, JumpOperator, ModelParams};
pub use record::{JumpEvent, Protocol, RunSettings, TrajectoryRecord};
