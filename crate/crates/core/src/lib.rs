//! Simulation and bifurcation analysis of the piecewise-smooth sleep-wake
//! flip-flop model.

pub mod atlas;
pub mod chs;
pub mod circlemap;
pub mod error;
pub mod export;
pub mod fastslow;
pub mod integrator;
pub mod model;
pub mod params;
pub mod rotation;

pub use error::{Error, Result};
pub use integrator::{
    integrate, integrate_system, Control, EventKind, EventRecord, IntegratorOptions, SampleMode, SystemKind,
    Trajectory,
};
pub use model::{ModelState, Regime};
pub use params::ParameterSet;
