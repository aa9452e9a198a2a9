//! Exhaustive reference for the greedy scheduler on tiny instances.
//!
//! Enumerates every task processing order and, for every remote share, every
//! eligible target, applying the same allocation and fallback rules as
//! [`super::schedule`]. A share falls through only when no node is eligible
//! or the chosen one runs short, so the greedy result is always one of the
//! enumerated leaves.

use thiserror::Error;

use super::{eligible_nodes, is_compute, Ledger};
use crate::cost::slot_metrics_with_uav_energy;
use crate::slot::SlotContext;
use crate::types::{Mode, OffloadDecision, Task};

pub const MAX_TASKS: usize = 4;
pub const MAX_NODES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {tasks} tasks, {nodes} nodes")]
    TooLarge { tasks: usize, nodes: usize },
}

#[derive(Debug, Clone)]
pub struct BestAssignment {
    pub reward: f64,
    pub decisions: Vec<OffloadDecision>,
    pub leaves: usize,
}

/// Slot reward of a resolved schedule, counting only terms the schedule can
/// change (UAV propulsion and hover energy are left out).
pub fn schedule_reward(ctx: &SlotContext<'_>, tasks: &[Task], decisions: &[OffloadDecision]) -> f64 {
    let (outcomes, _) = ctx.evaluate(tasks, decisions);
    slot_metrics_with_uav_energy(&outcomes, 0.0, ctx.scn).reward
}

pub fn brute_force_schedule(
    ctx: &SlotContext<'_>,
    decisions: &[OffloadDecision],
    tasks: &[Task],
) -> Result<BestAssignment, OracleError> {
    let nodes = ctx.nodes.iter().filter(|n| is_compute(n.kind)).count();
    if tasks.len() > MAX_TASKS || nodes > MAX_NODES {
        return Err(OracleError::TooLarge { tasks: tasks.len(), nodes });
    }
    let mut best = BestAssignment { reward: f64::NEG_INFINITY, decisions: Vec::new(), leaves: 0 };
    if tasks.is_empty() {
        best.reward = schedule_reward(ctx, tasks, &[]);
        best.leaves = 1;
        return Ok(best);
    }
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    permute(&mut order, 0, &mut |order| {
        let steps: Vec<(usize, Mode)> = order
            .iter()
            .flat_map(|&i| Mode::FALLBACK_CHAIN.into_iter().filter(|m| m.is_remote()).map(move |m| (i, m)))
            .collect();
        let ledger = Ledger::new(ctx, decisions);
        search(ctx, tasks, &steps, 0, ledger, &mut best);
    });
    Ok(best)
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn search(
    ctx: &SlotContext<'_>,
    tasks: &[Task],
    steps: &[(usize, Mode)],
    at: usize,
    ledger: Ledger,
    best: &mut BestAssignment,
) {
    let Some(&(i, mode)) = steps.get(at) else {
        let reward = schedule_reward(ctx, tasks, &ledger.decisions);
        best.leaves += 1;
        if reward > best.reward {
            best.reward = reward;
            best.decisions = ledger.decisions;
        }
        return;
    };
    if ledger.decisions[i].lambda[mode.index()] <= 0.0 {
        search(ctx, tasks, steps, at + 1, ledger, best);
        return;
    }
    let candidates = eligible_nodes(ctx, tasks[i].vehicle_id, mode, &ledger.nodes);
    if candidates.is_empty() {
        let mut next = ledger;
        next.place(ctx, &tasks[i], i, mode, None);
        search(ctx, tasks, steps, at + 1, next, best);
        return;
    }
    for c in &candidates {
        let mut next = ledger.clone();
        next.place(ctx, &tasks[i], i, mode, Some(c.node));
        search(ctx, tasks, steps, at + 1, next, best);
    }
}
