//! TRP deployment evaluation for 5G indoor DL-TDOA positioning.
//!
//! The crate builds the IOO / InF evaluation scenarios and their TRP layouts,
//! synthesizes DL-TDOA measurements under a statistical LOS/NLOS model,
//! evaluates Fisher-information bounds (CRLB RMSE, GDOP) pointwise and over
//! floor-plan grids, estimates positions with a damped Gauss-Newton solver and
//! runs reproducible Monte Carlo campaigns including worst-UE-targeted TRP
//! densification.

pub mod bounds;
pub mod campaign;
pub mod channel;
pub mod config;
pub mod estimator;
pub mod export;
pub mod rng;
pub mod scenario;

/// Positions and directions in meters, `[x, y, z]`.
pub type Point3 = nalgebra::Vector3<f64>;

pub use bounds::{BoundCell, BoundGrid, FimResult, RefPolicy};
pub use campaign::{CampaignConfig, CampaignResult, DropRecord, MeasurementMode};
pub use channel::{MeasurementSet, NoiseModel, UeDrop};
pub use estimator::{FixResult, SolveOptions};
pub use scenario::{Deployment, LayoutTag, ScenarioFamily, ScenarioSpec, Trp};
