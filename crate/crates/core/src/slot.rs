//! Frozen network snapshot of one slot: positions, shadowing, bandwidth
//! sharing, and evaluation of resolved decisions into per-task outcomes.

use crate::channel::{self, clamped_distance};
use crate::config::Scenario;
use crate::cost::{self, ModeCost, TaskOutcome};
use crate::types::{distance, Mode, NodeId, NodeKind, NodeState, OffloadDecision, Task};

/// Positions are static within a slot, so this is everything the scheduler
/// and the cost evaluation need.
#[derive(Debug, Clone)]
pub struct SlotContext<'a> {
    pub scn: &'a Scenario,
    pub vehicles: &'a [NodeState],
    /// Computing and relay nodes; the HUAV is `nodes[huav]`.
    pub nodes: &'a [NodeState],
    pub huav: NodeId,
    /// Shadowing factor per vehicle per node (only RSU entries are used).
    pub shadowing: &'a [Vec<f64>],
}

/// Number of flows sharing each radio in the current slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkLoad {
    pub direct: Vec<usize>,
    pub relay: usize,
}

impl LinkLoad {
    pub fn empty(num_nodes: usize) -> Self {
        Self { direct: vec![0; num_nodes], relay: 0 }
    }

    pub fn from_decisions(decisions: &[OffloadDecision], num_nodes: usize) -> Self {
        let mut load = Self::empty(num_nodes);
        for d in decisions {
            for m in Mode::REMOTE {
                if d.lambda[m.index()] > 0.0 {
                    if let Some(x) = d.target[m.index()] {
                        load.add(m, x);
                    }
                }
            }
        }
        load
    }

    pub fn add(&mut self, mode: Mode, node: NodeId) {
        if mode.is_relay() {
            self.relay += 1;
        } else {
            self.direct[node] += 1;
        }
    }
}

impl<'a> SlotContext<'a> {
    pub fn distance(&self, vehicle: usize, node: NodeId) -> f64 {
        distance(&self.vehicles[vehicle].position, &self.nodes[node].position)
    }

    /// Nearest RSU within RSU coverage, if any.
    pub fn direct_rsu(&self, vehicle: usize) -> Option<NodeId> {
        let radius = self.scn.cfg.scheduler.rsu_radius;
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Rsu)
            .map(|n| (n.id, self.distance(vehicle, n.id)))
            .filter(|&(_, d)| d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(id, _)| id)
    }

    fn direct_bandwidth(&self, node: NodeId) -> f64 {
        let c = &self.scn.cfg.channel;
        match self.nodes[node].kind {
            NodeKind::Rsu => c.bw_vehicle_rsu,
            NodeKind::Luav => c.bw_vehicle_luav,
            _ => 0.0,
        }
    }

    /// Uplink rate from a vehicle to an RSU (NLoS, shadowed) or LUAV (LoS)
    /// when `users` flows share the node's bandwidth.
    pub fn direct_rate(&self, vehicle: usize, node: NodeId, users: usize) -> f64 {
        let c = &self.scn.cfg.channel;
        let d = clamped_distance(&self.vehicles[vehicle].position, &self.nodes[node].position, c.min_distance);
        let gain = match self.nodes[node].kind {
            NodeKind::Rsu => {
                channel::g2g_gain(d, self.scn.beta0, c.alpha_nlos, self.shadowing[vehicle][node])
            }
            _ => channel::los_gain(d, self.scn.beta0, c.alpha_los),
        }
        .expect("clamped distance is positive");
        let bw = self.direct_bandwidth(node) / users.max(1) as f64;
        channel::link_rate(bw, self.scn.cfg.vehicle.tx_power, gain, self.scn.noise_power)
            .expect("noise validated")
    }

    /// Both hop rates of a relay flow when `flows` relay flows share the HUAV.
    pub fn relay_rates(&self, vehicle: usize, target: NodeId, flows: usize) -> (f64, f64) {
        let c = &self.scn.cfg.channel;
        let share = flows.max(1) as f64;
        channel::relay_pair_rates(
            self.scn,
            &self.vehicles[vehicle].position,
            &self.nodes[self.huav].position,
            &self.nodes[target],
            self.direct_rsu(vehicle),
            c.bw_vehicle_huav / share,
            c.bw_huav_node / share,
        )
        .expect("scheduler only relays to valid targets")
    }

    /// Costs of every mode of a resolved decision under the final load.
    pub fn mode_costs(&self, task: &Task, d: &OffloadDecision, load: &LinkLoad) -> [ModeCost<f64>; 5] {
        let scn = self.scn;
        let v = task.vehicle_id;
        let mut out = [ModeCost::zero(); 5];
        out[0] = cost::local_cost(d.lambda[0], task, scn.cfg.vehicle.cpu, scn.cfg.vehicle.kappa)
            .expect("vehicle cpu validated");
        for m in Mode::REMOTE {
            let lambda = d.lambda[m.index()];
            let Some(x) = d.target[m.index()] else { continue };
            if lambda <= 0.0 {
                continue;
            }
            let node = &self.nodes[x];
            let f = d.alloc[m.index()];
            let c = if m.is_relay() {
                let (r1, r2) = self.relay_rates(v, x, load.relay);
                cost::relay_cost(
                    lambda,
                    task,
                    r1,
                    r2,
                    f,
                    node.kappa,
                    scn.cfg.vehicle.tx_power,
                    scn.cfg.uav.huav_tx_power,
                )
            } else {
                let r = self.direct_rate(v, x, load.direct[x]);
                cost::edge_cost(lambda, task, r, f, node.kappa, scn.cfg.vehicle.tx_power)
            };
            out[m.index()] = c.expect("resolved decision has rate and allocation");
        }
        out
    }

    /// Turns resolved decisions into per-task outcomes plus the computation
    /// energy spent on each node.
    pub fn evaluate(
        &self,
        tasks: &[Task],
        decisions: &[OffloadDecision],
    ) -> (Vec<TaskOutcome>, Vec<f64>) {
        let load = LinkLoad::from_decisions(decisions, self.nodes.len());
        let mut node_energy = vec![0.0; self.nodes.len()];
        let outcomes = tasks
            .iter()
            .zip(decisions)
            .map(|(task, d)| {
                let costs = self.mode_costs(task, d, &load);
                for m in Mode::REMOTE {
                    if let Some(x) = d.target[m.index()] {
                        let lambda = d.lambda[m.index()];
                        node_energy[x] += self.nodes[x].kappa * d.alloc[m.index()].powi(2)
                            * lambda
                            * task.cycles;
                    }
                }
                TaskOutcome::from_costs(task, d.lambda, &costs)
            })
            .collect();
        (outcomes, node_energy)
    }

    /// True when even the aggregate CPU of the vehicle and every node cannot
    /// process the task before its deadline, ignoring transmission.
    pub fn infeasible(&self, task: &Task) -> bool {
        let total: f64 = self.scn.cfg.vehicle.cpu
            + self
                .nodes
                .iter()
                .filter(|n| n.kind != NodeKind::Huav && !n.depleted)
                .map(|n| n.cpu_total)
                .sum::<f64>();
        task.cycles / total > task.deadline
    }
}
