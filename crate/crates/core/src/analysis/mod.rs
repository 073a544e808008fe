//! Post-processing of states and trajectories.

pub mod ensemble;
pub mod histogram;
pub mod switches;
pub mod wigner;

pub use ensemble::{ensemble_average, EnsembleOptions, EnsembleResult};
pub use histogram::{find_modes, stationary_histogram, Histogram, Mode};
pub use switches::{detect_switches, SwitchReport};
pub use wigner::{wigner, WignerGrid};
