//! Simulation configuration, loaded from sectioned `key = value` TOML.
//!
//! [`SimConfig`] mirrors the file and keeps radio quantities in dB;
//! [`SimConfig::validate`] checks every invariant and produces a [`Scenario`]
//! holding the linear-unit values used everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cost::{self, RotorParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm) * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub channel: ChannelConfig,
    pub vehicle: VehicleConfig,
    pub nodes: NodesConfig,
    pub uav: UavConfig,
    pub task: TaskConfig,
    pub reward: RewardConfig,
    pub scheduler: SchedulerConfig,
    pub agent: AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_vehicles: usize,
    pub num_rsus: usize,
    pub num_luavs: usize,
    /// Side of the square area, meters.
    pub area_side: f64,
    /// Episode horizon T, seconds.
    pub horizon: f64,
    pub num_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub beta0_db: f64,
    pub alpha_nlos: f64,
    pub alpha_los: f64,
    pub shadow_mu_db: f64,
    pub shadow_sigma_db: f64,
    pub noise_power_dbm: f64,
    /// Total bandwidth of one RSU, shared by its uploaders (Hz).
    pub bw_vehicle_rsu: f64,
    /// Total bandwidth of one LUAV (Hz).
    pub bw_vehicle_luav: f64,
    /// HUAV uplink bandwidth for the first relay hop (Hz).
    pub bw_vehicle_huav: f64,
    /// HUAV downlink bandwidth for the second relay hop (Hz).
    pub bw_huav_node: f64,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub speed_min: f64,
    pub speed_max: f64,
    pub tx_power: f64,
    pub cpu: f64,
    pub kappa: f64,
    pub speed_resample_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesConfig {
    pub rsu_cpu: f64,
    pub bs_cpu: f64,
    pub luav_cpu: f64,
    pub rsu_kappa: f64,
    pub bs_kappa: f64,
    pub luav_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    pub luav_altitude: f64,
    pub huav_altitude: f64,
    pub luav_vmax: f64,
    pub huav_tx_power: f64,
    pub luav_energy_budget: f64,
    pub huav_energy_budget: f64,
    pub luav_rotor: RotorParams<f64>,
    pub huav_rotor: RotorParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Bits.
    pub size_min: f64,
    pub size_max: f64,
    pub cycles_per_bit: f64,
    /// Seconds.
    pub deadline_min: f64,
    pub deadline_max: f64,
    pub priority_levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub w_completion: f64,
    pub w_delay: f64,
    pub w_energy: f64,
    /// β_T; derived from the task config when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_norm: Option<f64>,
    /// β_E; derived from the UAV hover power when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eligibility_fraction: f64,
    pub rsu_radius: f64,
    pub luav_radius: f64,
    /// Vehicle-to-HUAV reach; absent means the whole area.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub huav_radius: Option<f64>,
    /// Offloading shares below this fraction are dropped before scheduling.
    pub min_offload_fraction: f64,
    /// Fraction of the post-transmission slack that the CPU grant targets;
    /// 1 plans every remote share to finish exactly at its deadline.
    pub compute_budget_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub update_every: usize,
    /// Uniform-random steps collected before the first update.
    pub warmup_steps: usize,
    pub init_alpha: f64,
    /// Defaults to minus the action dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_entropy: Option<f64>,
    pub dqn_epsilon_start: f64,
    pub dqn_epsilon_end: f64,
    pub dqn_epsilon_decay_steps: usize,
    pub precision: Precision,
}

/// Validated configuration plus derived linear-unit quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cfg: SimConfig,
    pub beta0: f64,
    pub noise_power: f64,
    pub slot_len: f64,
    pub delay_norm: f64,
    pub energy_norm: f64,
    pub huav_radius: f64,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Values used in the reference evaluation, shipped as `configs/default.toml`.
    pub fn paper_defaults() -> Self {
        Self::from_toml_str(DEFAULT_TOML).expect("embedded defaults parse")
    }

    /// Desk-scale profile used for the trend experiments.
    pub fn desk() -> Self {
        Self::from_toml_str(DESK_TOML).expect("embedded desk profile parses")
    }

    /// Stable digest of every field, used to tag results and checkpoints.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn num_observation(&self) -> usize {
        let n = &self.network;
        7 * n.num_vehicles + 4 * (n.num_luavs + n.num_rsus + 1) + 2 * n.num_luavs
    }

    pub fn num_action(&self) -> usize {
        5 * self.network.num_vehicles + 2 * self.network.num_luavs
    }

    pub fn validate(&self) -> Result<Scenario, ConfigError> {
        let n = &self.network;
        if n.num_vehicles < 1 {
            return Err(invalid("network.num_vehicles", "must be at least 1"));
        }
        if n.num_rsus < 1 {
            return Err(invalid("network.num_rsus", "must be at least 1"));
        }
        if n.num_rsus > 16 {
            return Err(invalid("network.num_rsus", "the road grid has 16 intersections"));
        }
        if n.num_slots < 1 {
            return Err(invalid("network.num_slots", "must be at least 1"));
        }
        positive("network.area_side", n.area_side)?;
        positive("network.horizon", n.horizon)?;

        let c = &self.channel;
        positive("channel.alpha_nlos", c.alpha_nlos)?;
        positive("channel.alpha_los", c.alpha_los)?;
        finite("channel.beta0_db", c.beta0_db)?;
        finite("channel.noise_power_dbm", c.noise_power_dbm)?;
        finite("channel.shadow_mu_db", c.shadow_mu_db)?;
        if !(c.shadow_sigma_db >= 0.0 && c.shadow_sigma_db.is_finite()) {
            return Err(invalid("channel.shadow_sigma_db", "must be finite and non-negative"));
        }
        positive("channel.bw_vehicle_rsu", c.bw_vehicle_rsu)?;
        positive("channel.bw_vehicle_luav", c.bw_vehicle_luav)?;
        positive("channel.bw_vehicle_huav", c.bw_vehicle_huav)?;
        positive("channel.bw_huav_node", c.bw_huav_node)?;
        positive("channel.min_distance", c.min_distance)?;

        let v = &self.vehicle;
        if !(v.speed_min >= 0.0) {
            return Err(invalid("vehicle.speed_min", "must be non-negative"));
        }
        if !(v.speed_max >= v.speed_min && v.speed_max.is_finite()) {
            return Err(invalid("vehicle.speed_max", "must be finite and at least speed_min"));
        }
        positive("vehicle.tx_power", v.tx_power)?;
        positive("vehicle.cpu", v.cpu)?;
        positive("vehicle.kappa", v.kappa)?;
        probability("vehicle.speed_resample_prob", v.speed_resample_prob)?;

        let nd = &self.nodes;
        positive("nodes.rsu_cpu", nd.rsu_cpu)?;
        positive("nodes.bs_cpu", nd.bs_cpu)?;
        positive("nodes.luav_cpu", nd.luav_cpu)?;
        positive("nodes.rsu_kappa", nd.rsu_kappa)?;
        positive("nodes.bs_kappa", nd.bs_kappa)?;
        positive("nodes.luav_kappa", nd.luav_kappa)?;

        let u = &self.uav;
        positive("uav.luav_altitude", u.luav_altitude)?;
        positive("uav.huav_altitude", u.huav_altitude)?;
        positive("uav.luav_vmax", u.luav_vmax)?;
        positive("uav.huav_tx_power", u.huav_tx_power)?;
        positive("uav.luav_energy_budget", u.luav_energy_budget)?;
        positive("uav.huav_energy_budget", u.huav_energy_budget)?;
        u.luav_rotor.validate().map_err(|r| invalid("uav.luav_rotor", r))?;
        u.huav_rotor.validate().map_err(|r| invalid("uav.huav_rotor", r))?;

        let t = &self.task;
        positive("task.size_min", t.size_min)?;
        positive("task.size_max", t.size_max)?;
        if t.size_min > t.size_max {
            return Err(invalid("task.size_min", "must not exceed size_max"));
        }
        positive("task.cycles_per_bit", t.cycles_per_bit)?;
        positive("task.deadline_min", t.deadline_min)?;
        positive("task.deadline_max", t.deadline_max)?;
        if t.deadline_min > t.deadline_max {
            return Err(invalid("task.deadline_min", "must not exceed deadline_max"));
        }
        if t.priority_levels.is_empty() {
            return Err(invalid("task.priority_levels", "must list at least one level"));
        }

        let r = &self.reward;
        for (field, w) in [
            ("reward.w_completion", r.w_completion),
            ("reward.w_delay", r.w_delay),
            ("reward.w_energy", r.w_energy),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(invalid(field, "weight must lie in [0, 1]"));
            }
        }
        if (r.w_completion + r.w_delay + r.w_energy - 1.0).abs() > 1e-9 {
            return Err(invalid("reward.w_completion", "weights must sum to 1"));
        }
        if let Some(x) = r.delay_norm {
            positive("reward.delay_norm", x)?;
        }
        if let Some(x) = r.energy_norm {
            positive("reward.energy_norm", x)?;
        }

        let s = &self.scheduler;
        if !(s.alpha >= 0.0 && s.alpha.is_finite()) {
            return Err(invalid("scheduler.alpha", "must be finite and non-negative"));
        }
        if !(s.beta >= 0.0 && s.beta.is_finite()) {
            return Err(invalid("scheduler.beta", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&s.eligibility_fraction) {
            return Err(invalid("scheduler.eligibility_fraction", "must lie in [0, 1)"));
        }
        positive("scheduler.rsu_radius", s.rsu_radius)?;
        positive("scheduler.luav_radius", s.luav_radius)?;
        if let Some(x) = s.huav_radius {
            positive("scheduler.huav_radius", x)?;
        }
        if !(0.0..0.2).contains(&s.min_offload_fraction) {
            return Err(invalid("scheduler.min_offload_fraction", "must lie in [0, 0.2)"));
        }
        if !(s.compute_budget_fraction > 0.0 && s.compute_budget_fraction <= 1.0) {
            return Err(invalid("scheduler.compute_budget_fraction", "must lie in (0, 1]"));
        }

        let a = &self.agent;
        if a.hidden.is_empty() || a.hidden.contains(&0) {
            return Err(invalid("agent.hidden", "needs at least one non-empty hidden layer"));
        }
        if !(a.gamma >= 0.0 && a.gamma < 1.0) {
            return Err(invalid("agent.gamma", "must lie in [0, 1)"));
        }
        if !(a.tau > 0.0 && a.tau <= 1.0) {
            return Err(invalid("agent.tau", "must lie in (0, 1]"));
        }
        positive("agent.lr_actor", a.lr_actor)?;
        positive("agent.lr_critic", a.lr_critic)?;
        positive("agent.lr_alpha", a.lr_alpha)?;
        positive("agent.init_alpha", a.init_alpha)?;
        if a.batch_size < 2 {
            return Err(invalid("agent.batch_size", "must be at least 2"));
        }
        if a.buffer_capacity < a.batch_size {
            return Err(invalid("agent.buffer_capacity", "must hold at least one batch"));
        }
        if a.update_every < 1 {
            return Err(invalid("agent.update_every", "must be at least 1"));
        }
        probability("agent.dqn_epsilon_start", a.dqn_epsilon_start)?;
        probability("agent.dqn_epsilon_end", a.dqn_epsilon_end)?;

        let slot_len = n.horizon / n.num_slots as f64;
        let delay_norm =
            r.delay_norm.unwrap_or(1.0 / (n.num_vehicles as f64 * t.deadline_max));
        let hover_per_slot = (n.num_luavs as f64 * cost::propulsion_power(0.0, &u.luav_rotor)
            .expect("validated rotor")
            + cost::propulsion_power(0.0, &u.huav_rotor).expect("validated rotor"))
            * slot_len;
        let energy_norm =
            r.energy_norm.unwrap_or(1.0 / (n.num_vehicles as f64 * 1.0 + hover_per_slot));
        let huav_radius = s.huav_radius.unwrap_or_else(|| {
            let diag = n.area_side * std::f64::consts::SQRT_2;
            (diag * diag + u.huav_altitude * u.huav_altitude).sqrt() + 1.0
        });

        Ok(Scenario {
            cfg: self.clone(),
            beta0: db_to_linear(c.beta0_db),
            noise_power: dbm_to_watts(c.noise_power_dbm),
            slot_len,
            delay_norm,
            energy_norm,
            huav_radius,
        })
    }
}

fn positive(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and positive, got {x}")))
    }
}

fn finite(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn probability(field: &'static str, x: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(field, "must lie in [0, 1]"))
    }
}

impl Scenario {
    pub fn num_vehicles(&self) -> usize {
        self.cfg.network.num_vehicles
    }

    pub fn num_luavs(&self) -> usize {
        self.cfg.network.num_luavs
    }

    pub fn num_rsus(&self) -> usize {
        self.cfg.network.num_rsus
    }

    pub fn num_observation(&self) -> usize {
        self.cfg.num_observation()
    }

    pub fn num_action(&self) -> usize {
        self.cfg.num_action()
    }
}

pub const DEFAULT_TOML: &str = include_str!("../../../configs/default.toml");
pub const DESK_TOML: &str = include_str!("../../../configs/desk.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_conversions() {
        assert!((db_to_linear(-50.0) - 1e-5).abs() <= 1e-5 * 1e-12);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((dbm_to_watts(-110.0) - 1e-14).abs() <= 1e-14 * 1e-12);
    }

    #[test]
    fn defaults_validate() {
        let cfg = SimConfig::paper_defaults();
        let scn = cfg.validate().unwrap();
        assert_eq!(scn.cfg, cfg);
        assert_eq!(cfg.reward.w_completion, 0.6);
        assert!((scn.beta0 - 1e-5).abs() < 1e-17);
        SimConfig::desk().validate().unwrap();
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.reward.w_completion = 0.5;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("weights must sum to 1"), "{err}");
    }

    #[test]
    fn eligibility_fraction_range() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.scheduler.eligibility_fraction = 1.2;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("eligibility_fraction"), "{err}");
    }

    #[test]
    fn reversed_ranges_rejected() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.task.size_min = cfg.task.size_max * 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::paper_defaults();
        cfg.task.deadline_min = 2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_luavs_allowed() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.network.num_luavs = 0;
        cfg.validate().unwrap();
        cfg.network.num_vehicles = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{}\nbogus = 1\n", "");
        let mut full = String::from(DEFAULT_TOML);
        full.insert_str(0, "bogus = 1\n");
        assert!(SimConfig::from_toml_str(&full).is_err());
        let nested = DEFAULT_TOML.replace("[network]", "[network]\nextra_field = 3");
        assert!(SimConfig::from_toml_str(&nested).is_err());
        assert!(SimConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let cfg = SimConfig::desk();
        let a = cfg.validate().unwrap();
        let b = a.cfg.validate().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn toml_roundtrip_and_hash() {
        let cfg = SimConfig::paper_defaults();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn observation_dimension() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.network.num_vehicles = 20;
        cfg.network.num_luavs = 4;
        let r = cfg.network.num_rsus;
        assert_eq!(cfg.num_observation(), 7 * 20 + 4 * (4 + r + 1) + 2 * 4);
    }
}
