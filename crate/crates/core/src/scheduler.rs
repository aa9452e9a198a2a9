//! Lower decision layer: orders the slot's tasks, resolves a target node for
//! every remote share, allocates CPU, and walks the fallback chain when a mode
//! has no usable node.

pub mod oracle;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::slot::{LinkLoad, SlotContext};
use crate::types::{Mode, NodeId, NodeKind, NodeState, OffloadDecision, Task};

/// Order in which tasks claim resources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TaskOrder {
    /// Priority descending, then deadline ascending, then vehicle id.
    #[default]
    Priority,
    /// Arrival order, i.e. vehicle id.
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub distance: f64,
    pub remain_fraction: f64,
    pub score: f64,
}

fn priority_cmp(a: &Task, b: &Task) -> Ordering {
    b.priority
        .cmp(&a.priority)
        .then(a.deadline.total_cmp(&b.deadline))
        .then(a.vehicle_id.cmp(&b.vehicle_id))
}

pub fn sort_tasks(tasks: &[Task]) -> Vec<Task> {
    let mut out = tasks.to_vec();
    out.sort_by(priority_cmp);
    out
}

/// Indices into `tasks` in scheduling order.
pub fn task_order(tasks: &[Task], order: TaskOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tasks.len()).collect();
    match order {
        TaskOrder::Priority => idx.sort_by(|&a, &b| priority_cmp(&tasks[a], &tasks[b])),
        TaskOrder::Fifo => idx.sort_by_key(|&i| tasks[i].vehicle_id),
    }
    idx
}

/// `α/d + β·f_remain/F_max`, with `d` clamped to 1 m.
pub fn score_node(c: &Candidate, alpha: f64, beta: f64) -> f64 {
    alpha / c.distance.max(1.0) + beta * c.remain_fraction
}

/// Nodes that may serve `mode` for `vehicle`: reachable, not depleted, and
/// holding strictly more than the eligibility fraction of their CPU.
pub fn eligible_nodes(
    ctx: &SlotContext<'_>,
    vehicle: usize,
    mode: Mode,
    nodes: &[NodeState],
) -> Vec<Candidate> {
    let sc = &ctx.scn.cfg.scheduler;
    let Some(kind) = mode.target_kind() else { return Vec::new() };
    let relay_reach = || {
        crate::types::distance(&ctx.vehicles[vehicle].position, &nodes[ctx.huav].position)
            <= ctx.scn.huav_radius
    };
    if mode.is_relay() && !relay_reach() {
        return Vec::new();
    }
    let direct = if mode == Mode::HuavRsu { ctx.direct_rsu(vehicle) } else { None };
    nodes
        .iter()
        .filter(|n| n.kind == kind && !n.depleted)
        .filter(|n| !(mode == Mode::HuavRsu && Some(n.id) == direct))
        .filter_map(|n| {
            let distance = crate::types::distance(&ctx.vehicles[vehicle].position, &n.position);
            let reach = match mode {
                Mode::Rsu => distance <= sc.rsu_radius,
                Mode::Luav => distance <= sc.luav_radius,
                _ => true,
            };
            let remain_fraction = n.remain_fraction();
            if !reach || remain_fraction <= sc.eligibility_fraction {
                return None;
            }
            let mut c = Candidate { node: n.id, distance, remain_fraction, score: 0.0 };
            c.score = score_node(&c, sc.alpha, sc.beta);
            Some(c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub granted: f64,
    pub demand: f64,
}

impl Allocation {
    pub fn shortfall(&self) -> bool {
        self.granted < self.demand
    }
}

/// Deadline-driven CPU grant: the frequency that finishes `lambda·C` within
/// `budget_fraction` of the time left after the estimated transmission,
/// capped by what the node still has. Deducts the grant from the node.
pub fn allocate(
    task: &Task,
    lambda: f64,
    node: &mut NodeState,
    tx_delay_est: f64,
    budget_fraction: f64,
) -> Allocation {
    if lambda <= 0.0 {
        return Allocation { granted: 0.0, demand: 0.0 };
    }
    let budget = budget_fraction * (task.deadline - tx_delay_est).max(0.1 * task.deadline);
    let demand = lambda * task.cycles / budget;
    let granted = demand.min(node.cpu_remaining);
    node.cpu_remaining -= granted;
    Allocation { granted, demand }
}

/// Mutable per-slot ledger shared by the greedy pass and the oracle.
#[derive(Debug, Clone)]
pub(crate) struct Ledger {
    pub nodes: Vec<NodeState>,
    pub load: LinkLoad,
    pub decisions: Vec<OffloadDecision>,
}

impl Ledger {
    pub fn new(ctx: &SlotContext<'_>, decisions: &[OffloadDecision]) -> Self {
        Self {
            nodes: ctx.nodes.to_vec(),
            load: LinkLoad::empty(ctx.nodes.len()),
            decisions: decisions
                .iter()
                .map(|d| OffloadDecision::unresolved(d.vehicle_id, d.lambda))
                .collect(),
        }
    }

    /// Try to place decision `slot`'s `mode` share on `node`. The placement
    /// fails when the node cannot grant the full demand or when the estimated
    /// transmission plus compute time overruns the deadline; the share then
    /// moves to the mode's fallback successor.
    pub fn place(
        &mut self,
        ctx: &SlotContext<'_>,
        task: &Task,
        slot: usize,
        mode: Mode,
        node: Option<NodeId>,
    ) {
        let k = mode.index();
        let lambda = self.decisions[slot].lambda[k];
        if lambda <= 0.0 {
            return;
        }
        if let Some(x) = node {
            let v = task.vehicle_id;
            let tx = if mode.is_relay() {
                let (r1, r2) = ctx.relay_rates(v, x, self.load.relay + 1);
                lambda * task.data_size / r1 + lambda * task.data_size / r2
            } else {
                lambda * task.data_size / ctx.direct_rate(v, x, self.load.direct[x] + 1)
            };
            let before = self.nodes[x].cpu_remaining;
            let a = allocate(task, lambda, &mut self.nodes[x], tx, ctx.scn.cfg.scheduler.compute_budget_fraction);
            let finish = tx + lambda * task.cycles / a.granted;
            if !a.shortfall() && a.granted > 0.0 && finish <= task.deadline {
                let d = &mut self.decisions[slot];
                d.target[k] = Some(x);
                d.alloc[k] = a.granted;
                self.load.add(mode, x);
                return;
            }
            self.nodes[x].cpu_remaining = before;
        }
        let next = mode.fallback().expect("remote modes have a successor");
        let d = &mut self.decisions[slot];
        d.lambda[k] = 0.0;
        // Rounding can push an absorbed share one ulp past 1.
        d.lambda[next.index()] = (d.lambda[next.index()] + lambda).min(1.0);
    }
}

/// Greedy priority scheduling. Returns one decision per input decision, in
/// the same order, with targets and allocations resolved; mass that cannot be
/// placed ends on LOCAL. `tasks[i]` belongs to `decisions[i]`.
pub fn schedule(
    ctx: &SlotContext<'_>,
    decisions: &[OffloadDecision],
    tasks: &[Task],
    order: TaskOrder,
) -> Vec<OffloadDecision> {
    let mut ledger = Ledger::new(ctx, decisions);
    for i in task_order(tasks, order) {
        let task = &tasks[i];
        for mode in Mode::FALLBACK_CHAIN.into_iter().filter(|m| m.is_remote()) {
            if ledger.decisions[i].lambda[mode.index()] <= 0.0 {
                continue;
            }
            let best = eligible_nodes(ctx, task.vehicle_id, mode, &ledger.nodes)
                .into_iter()
                .max_by(|a, b| a.score.total_cmp(&b.score).then(b.node.cmp(&a.node)))
                .map(|c| c.node);
            ledger.place(ctx, task, i, mode, best);
        }
    }
    debug_assert!(ledger.nodes.iter().all(|n| n.cpu_remaining >= 0.0));
    ledger.decisions
}

/// Total CPU granted on each node by a set of resolved decisions.
pub fn node_allocations(decisions: &[OffloadDecision], num_nodes: usize) -> Vec<f64> {
    let mut used = vec![0.0; num_nodes];
    for d in decisions {
        for m in Mode::REMOTE {
            if let Some(x) = d.target[m.index()] {
                used[x] += d.alloc[m.index()];
            }
        }
    }
    used
}

/// Compute nodes the scheduler may allocate on.
pub fn is_compute(kind: NodeKind) -> bool {
    matches!(kind, NodeKind::Rsu | NodeKind::Luav | NodeKind::Bs)
}
