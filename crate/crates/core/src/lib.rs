//! Time-slotted simulator of a dual-layer UAV-assisted vehicular edge
//! computing network.
//!
//! Vehicles generate one task per slot and split it across five execution
//! modes (local, RSU, low-altitude UAV, relay through the high-altitude UAV to
//! a remote RSU or to the base station). A continuous-action soft
//! actor-critic agent picks the split ratios and the LUAV trajectories, and a
//! priority scheduler resolves target nodes and CPU allocations.
//!
//! The physical formulas in [`channel`] and [`cost`] and the network core in
//! [`agents::nn`] are generic over the scalar type; the simulator itself runs
//! on [`Real`].

pub mod agents;
pub mod channel;
pub mod config;
pub mod cost;
pub mod env;
pub mod scalar;
pub mod scheduler;
pub mod slot;
pub mod types;

pub use config::{db_to_linear, linear_to_db, ConfigError, Scenario, SimConfig};
pub use scalar::Scalar;
pub use types::{
    LuavControl, Mode, NodeId, NodeKind, NodeState, OffloadDecision, SlotMetrics, Task, Vec3,
    Violations,
};

/// Scalar used by the simulator state and metrics.
pub type Real = f64;

pub type ModeCost64 = cost::ModeCost<f64>;
pub type ModeCost32 = cost::ModeCost<f32>;
pub type RotorParams64 = cost::RotorParams<f64>;
pub type RotorParams32 = cost::RotorParams<f32>;
pub type LinkBudget64 = channel::LinkBudget<f64>;

pub type Mlp64 = agents::nn::Mlp<f64>;
pub type Mlp32 = agents::nn::Mlp<f32>;
pub type Adam64 = agents::nn::Adam<f64>;
pub type Adam32 = agents::nn::Adam<f32>;
