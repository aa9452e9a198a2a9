//! The slotted MDP: reset, observation, action application and reward.
//!
//! One [`World::step`] runs the whole slot pipeline: map the raw action,
//! schedule, evaluate delays and energies, score the slot, then move vehicles
//! and LUAVs and draw the next tasks. CPU allocations are renewed every slot
//! and unfinished work is not carried over.

pub mod action;
pub mod mobility;
pub mod tasks;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use action::{lambda_from_logits, map_action};
pub use mobility::{move_luav, move_vehicles, Dir, RoadGrid};
pub use tasks::generate_tasks;

use crate::channel::sample_shadowing;
use crate::config::Scenario;
use crate::cost::slot_metrics;
use crate::scheduler::{self, node_allocations, TaskOrder};
use crate::slot::SlotContext;
use crate::types::{
    LuavControl, Mode, NodeId, NodeKind, NodeState, OffloadDecision, SlotMetrics, Task, Violations,
};

/// Behaviour switches used by the ablation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnvOptions {
    pub order: TaskOrder,
    /// Force every LUAV to hover in place.
    pub freeze_luavs: bool,
}

/// Snapshot of everything that evolves during an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub slot: usize,
    pub vehicles: Vec<NodeState>,
    pub nodes: Vec<NodeState>,
    pub tasks: Vec<Task>,
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub metrics: SlotMetrics,
    pub done: bool,
    pub decisions: Vec<OffloadDecision>,
    pub controls: Vec<LuavControl>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub scn: Scenario,
    pub opts: EnvOptions,
    pub grid: RoadGrid,
    pub slot: usize,
    pub vehicles: Vec<NodeState>,
    pub headings: Vec<Dir>,
    /// RSUs, then LUAVs, then the BS, then the HUAV.
    pub nodes: Vec<NodeState>,
    pub tasks: Vec<Task>,
    pub huav_energy_used: f64,
    rng: ChaCha8Rng,
}

fn node(id: NodeId, kind: NodeKind, position: [f64; 3], cpu: f64, kappa: f64, energy: f64) -> NodeState {
    NodeState {
        id,
        kind,
        position,
        cpu_total: cpu,
        cpu_remaining: cpu,
        kappa,
        energy_remaining: energy,
        velocity: 0.0,
        heading: 0.0,
        depleted: false,
    }
}

impl World {
    pub fn reset(scn: &Scenario, seed: u64) -> Self {
        Self::with_options(scn, seed, EnvOptions::default())
    }

    pub fn with_options(scn: &Scenario, seed: u64, opts: EnvOptions) -> Self {
        let cfg = &scn.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = RoadGrid::new(cfg.network.area_side);

        let mut vehicles = Vec::with_capacity(cfg.network.num_vehicles);
        let mut headings = Vec::with_capacity(cfg.network.num_vehicles);
        for i in 0..cfg.network.num_vehicles {
            let ((x, y), dir) = grid.random_road_point(&mut rng);
            let mut v = node(i, NodeKind::Vehicle, [x, y, 0.0], cfg.vehicle.cpu, cfg.vehicle.kappa, 0.0);
            v.velocity = mobility::sample_speed(cfg.vehicle.speed_min, cfg.vehicle.speed_max, &mut rng);
            vehicles.push(v);
            headings.push(dir);
        }

        let mut nodes = Vec::new();
        let spots = grid.central_intersections();
        for r in 0..cfg.network.num_rsus {
            let (x, y) = spots[r];
            nodes.push(node(nodes.len(), NodeKind::Rsu, [x, y, 0.0], cfg.nodes.rsu_cpu, cfg.nodes.rsu_kappa, 0.0));
        }
        for _ in 0..cfg.network.num_luavs {
            let ((x, y), _) = grid.random_road_point(&mut rng);
            nodes.push(node(
                nodes.len(),
                NodeKind::Luav,
                [x, y, cfg.uav.luav_altitude],
                cfg.nodes.luav_cpu,
                cfg.nodes.luav_kappa,
                cfg.uav.luav_energy_budget,
            ));
        }
        nodes.push(node(nodes.len(), NodeKind::Bs, [0.0, 0.0, 0.0], cfg.nodes.bs_cpu, cfg.nodes.bs_kappa, 0.0));
        let c = cfg.network.area_side / 2.0;
        nodes.push(node(
            nodes.len(),
            NodeKind::Huav,
            [c, c, cfg.uav.huav_altitude],
            0.0,
            0.0,
            cfg.uav.huav_energy_budget,
        ));

        let tasks = generate_tasks(&mut rng, scn);
        Self {
            scn: scn.clone(),
            opts,
            grid,
            slot: 0,
            vehicles,
            headings,
            nodes,
            tasks,
            huav_energy_used: 0.0,
            rng,
        }
    }

    pub fn huav(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn bs(&self) -> NodeId {
        self.nodes.len() - 2
    }

    pub fn luav_ids(&self) -> std::ops::Range<NodeId> {
        let r = self.scn.num_rsus();
        r..r + self.scn.num_luavs()
    }

    pub fn done(&self) -> bool {
        self.slot >= self.scn.cfg.network.num_slots
    }

    pub fn state(&self) -> WorldState {
        WorldState {
            slot: self.slot,
            vehicles: self.vehicles.clone(),
            nodes: self.nodes.clone(),
            tasks: self.tasks.clone(),
            observation: self.observation(),
        }
    }

    /// Raw observation: per vehicle `(x, y, v, D, C, T_max, K)`, per computing
    /// node `(f_remain, x, y, z)`, per LUAV `(heading, speed)`.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.scn.num_observation());
        for (v, t) in self.vehicles.iter().zip(&self.tasks) {
            obs.extend_from_slice(&[
                v.position[0],
                v.position[1],
                v.velocity,
                t.data_size,
                t.cycles,
                t.deadline,
                t.priority as f64,
            ]);
        }
        for n in self.nodes.iter().filter(|n| n.kind != NodeKind::Huav) {
            obs.extend_from_slice(&[n.cpu_remaining, n.position[0], n.position[1], n.position[2]]);
        }
        for l in self.luav_ids() {
            let n = &self.nodes[l];
            obs.extend_from_slice(&[n.heading, n.velocity]);
        }
        debug_assert_eq!(obs.len(), self.scn.num_observation());
        obs
    }

    fn sample_shadowing_matrix(&mut self) -> Vec<Vec<f64>> {
        let c = &self.scn.cfg.channel;
        let (mu, sigma) = (c.shadow_mu_db, c.shadow_sigma_db);
        let num_nodes = self.nodes.len();
        let num_rsus = self.scn.num_rsus();
        let mut out = Vec::with_capacity(self.vehicles.len());
        for _ in 0..self.vehicles.len() {
            let mut row = vec![1.0; num_nodes];
            for x in row.iter_mut().take(num_rsus) {
                *x = sample_shadowing(mu, sigma, &mut self.rng);
            }
            out.push(row);
        }
        out
    }

    /// Advance one slot under `raw_action` (components in [-1, 1]).
    pub fn step(&mut self, raw_action: &[f64]) -> StepOutcome {
        let (decisions, mut controls) = map_action(raw_action, &self.scn);
        if self.opts.freeze_luavs {
            for c in controls.iter_mut() {
                c.speed = 0.0;
            }
        }
        let shadowing = self.sample_shadowing_matrix();
        let ctx = SlotContext {
            scn: &self.scn,
            vehicles: &self.vehicles,
            nodes: &self.nodes,
            huav: self.huav(),
            shadowing: &shadowing,
        };
        let resolved = scheduler::schedule(&ctx, &decisions, &self.tasks, self.opts.order);
        let (outcomes, node_energy) = ctx.evaluate(&self.tasks, &resolved);

        let mut violations = Violations::default();
        for d in &resolved {
            if (d.lambda_sum() - 1.0).abs() > 1e-9 || d.lambda.iter().any(|&l| l < 0.0) {
                violations.lambda_sum += 1;
            }
            for m in Mode::REMOTE {
                if d.lambda[m.index()] > 0.0 && d.target[m.index()].is_none() {
                    violations.lambda_sum += 1;
                }
            }
        }
        let used = node_allocations(&resolved, self.nodes.len());
        for (n, u) in self.nodes.iter().zip(&used) {
            if *u > n.cpu_total * (1.0 + 1e-12) {
                violations.capacity += 1;
            }
        }
        violations.infeasible_tasks = self.tasks.iter().filter(|t| ctx.infeasible(t)).count() as u32;

        let flying: Vec<f64> = self
            .luav_ids()
            .filter(|&l| !self.nodes[l].depleted)
            .map(|l| controls[l - self.scn.num_rsus()].speed.clamp(0.0, self.scn.cfg.uav.luav_vmax))
            .collect();
        let mut metrics = slot_metrics(&outcomes, &flying, &self.scn);
        metrics.node_energy = node_energy;

        let hover = crate::cost::huav_hover_energy(&self.scn.cfg.uav.huav_rotor, self.scn.slot_len);
        self.huav_energy_used += hover;
        let huav = self.huav();
        let budget = self.scn.cfg.uav.huav_energy_budget;
        if self.huav_energy_used > budget {
            violations.huav_budget += 1;
        }
        self.nodes[huav].energy_remaining = (budget - self.huav_energy_used).max(0.0);

        move_vehicles(&self.grid, &mut self.vehicles, &mut self.headings, &self.scn, &mut self.rng);
        let max_step = self.scn.cfg.uav.luav_vmax * self.scn.slot_len;
        for (k, l) in self.luav_ids().enumerate() {
            let before = self.nodes[l].energy_remaining;
            let mv = move_luav(&mut self.nodes[l], &controls[k], &self.scn);
            if mv.displacement > max_step * (1.0 + 1e-12) {
                violations.displacement += 1;
            }
            if self.nodes[l].energy_remaining > before {
                violations.energy_monotone += 1;
            }
        }

        self.slot += 1;
        self.tasks = generate_tasks(&mut self.rng, &self.scn);
        for n in self.nodes.iter_mut() {
            n.cpu_remaining = n.cpu_total;
        }
        metrics.violations = violations;
        StepOutcome {
            observation: self.observation(),
            reward: metrics.reward,
            metrics,
            done: self.done(),
            decisions: resolved,
            controls,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn desk() -> Scenario {
        SimConfig::desk().validate().unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let scn = desk();
        assert_eq!(World::reset(&scn, 4).state(), World::reset(&scn, 4).state());
        assert_ne!(World::reset(&scn, 4).state(), World::reset(&scn, 5).state());
    }

    #[test]
    fn observation_shape() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.network.num_vehicles = 20;
        cfg.network.num_luavs = 4;
        let scn = cfg.validate().unwrap();
        let w = World::reset(&scn, 0);
        assert_eq!(w.observation().len(), 7 * 20 + 4 * (4 + scn.num_rsus() + 1) + 2 * 4);
    }

    #[test]
    fn full_cpu_at_reset_and_after_step() {
        let scn = desk();
        let mut w = World::reset(&scn, 1);
        assert!(w.nodes.iter().all(|n| n.cpu_remaining == n.cpu_total));
        let raw = vec![0.0; scn.num_action()];
        w.step(&raw);
        assert!(w.nodes.iter().all(|n| n.cpu_remaining == n.cpu_total));
    }

    #[test]
    fn rsus_on_central_intersections() {
        let scn = desk();
        let w = World::reset(&scn, 0);
        let a = 2000.0 / 3.0;
        for n in w.nodes.iter().filter(|n| n.kind == NodeKind::Rsu) {
            for c in [n.position[0], n.position[1]] {
                assert!((c - a).abs() < 1e-9 || (c - 2.0 * a).abs() < 1e-9);
            }
        }
        assert_eq!(w.nodes[w.huav()].position, [1000.0, 1000.0, 100.0]);
    }

    #[test]
    fn episode_ends_after_num_slots() {
        let scn = desk();
        let mut w = World::reset(&scn, 2);
        let raw = vec![0.0; scn.num_action()];
        for t in 0..scn.cfg.network.num_slots {
            let out = w.step(&raw);
            assert_eq!(out.done, t + 1 == scn.cfg.network.num_slots);
        }
    }
}
