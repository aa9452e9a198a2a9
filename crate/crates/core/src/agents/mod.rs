//! Upper decision layer: the SAC agent, the DQN baseline, heuristic
//! baselines, and the shared network and replay machinery.

pub mod checkpoint;
pub mod dqn;
pub mod gradcheck;
pub mod nn;
pub mod normalize;
pub mod replay;
pub mod sac;
pub mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::env::EnvOptions;
use crate::scheduler::TaskOrder;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use train::{evaluate, train, Agent, EpisodeMetrics, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    /// The hierarchical SAC agent with the priority scheduler.
    Sac,
    /// SAC with the scheduler in arrival order.
    NoPriority,
    /// SAC with every LUAV held in place.
    FixedUav,
    Dqn,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] =
        [AgentKind::Sac, AgentKind::NoPriority, AgentKind::FixedUav, AgentKind::Dqn, AgentKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Sac => "sac",
            AgentKind::NoPriority => "nopriority",
            AgentKind::FixedUav => "fixeduav",
            AgentKind::Dqn => "dqn",
            AgentKind::Random => "random",
        }
    }

    pub fn env_options(self) -> EnvOptions {
        EnvOptions {
            order: if self == AgentKind::NoPriority { TaskOrder::Fifo } else { TaskOrder::Priority },
            freeze_luavs: self == AgentKind::FixedUav,
        }
    }

    pub fn uses_sac(self) -> bool {
        matches!(self, AgentKind::Sac | AgentKind::NoPriority | AgentKind::FixedUav)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown agent '{0}' (expected sac, nopriority, fixeduav, dqn or random)")]
pub struct UnknownAgent(pub String);

impl FromStr for AgentKind {
    type Err = UnknownAgent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace(['-', '_'], "");
        AgentKind::ALL
            .into_iter()
            .find(|a| a.name() == k)
            .ok_or_else(|| UnknownAgent(s.to_string()))
    }
}

/// Uniform raw action in [-1, 1]^dim.
pub fn random_action<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Vec<f64> {
    (0..scn.num_action()).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Forces every LUAV speed component of a raw action to its minimum.
pub fn pin_luav_speeds(raw: &mut [f64], scn: &Scenario) {
    let base = 5 * scn.num_vehicles();
    for l in 0..scn.num_luavs() {
        raw[base + 2 * l + 1] = -1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        assert_eq!("Fixed-UAV".parse::<AgentKind>().unwrap(), AgentKind::FixedUav);
        assert!("ppo".parse::<AgentKind>().is_err());
    }

    #[test]
    fn switches() {
        assert_eq!(AgentKind::NoPriority.env_options().order, TaskOrder::Fifo);
        assert!(AgentKind::FixedUav.env_options().freeze_luavs);
        assert_eq!(AgentKind::Sac.env_options(), EnvOptions::default());
    }
}
