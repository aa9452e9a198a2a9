//! Hand-traced scheduling examples and a small exhaustive comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavec::env::lambda_from_logits;
use uavec::scheduler::oracle::{brute_force_schedule, schedule_reward};
use uavec::scheduler::{node_allocations, schedule, TaskOrder};
use uavec::slot::SlotContext;
use uavec::{Mode, NodeKind, NodeState, OffloadDecision, Scenario, SimConfig, Task, Vec3};

fn scenario(vehicles: usize) -> Scenario {
    let mut cfg = SimConfig::desk();
    cfg.network.num_vehicles = vehicles;
    cfg.network.num_rsus = 2;
    cfg.network.num_luavs = 1;
    cfg.validate().unwrap()
}

fn node(id: usize, kind: NodeKind, position: Vec3, cpu_total: f64, cpu_remaining: f64) -> NodeState {
    NodeState {
        id,
        kind,
        position,
        cpu_total,
        cpu_remaining,
        kappa: 1e-28,
        energy_remaining: 1e4,
        velocity: 0.0,
        heading: 0.0,
        depleted: false,
    }
}

fn vehicle(id: usize, position: Vec3) -> NodeState {
    node(id, NodeKind::Vehicle, position, 0.5e9, 0.5e9)
}

/// RSU 0, RSU 1, LUAV 2, BS 3, HUAV 4.
fn nodes(rsu: [(Vec3, f64, f64); 2], luav: (Vec3, f64)) -> Vec<NodeState> {
    vec![
        node(0, NodeKind::Rsu, rsu[0].0, rsu[0].1, rsu[0].2),
        node(1, NodeKind::Rsu, rsu[1].0, rsu[1].1, rsu[1].2),
        node(2, NodeKind::Luav, luav.0, luav.1, luav.1),
        node(3, NodeKind::Bs, [0.0, 0.0, 0.0], 10e9, 10e9),
        node(4, NodeKind::Huav, [1000.0, 1000.0, 100.0], 0.0, 0.0),
    ]
}

fn task(v: usize, priority: u32) -> Task {
    Task { vehicle_id: v, data_size: 1e6, cycles: 1e8, deadline: 1.0, priority }
}

fn ones(n: usize, m: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0; m]; n]
}

#[test]
fn higher_priority_task_wins_the_luav() {
    let scn = scenario(2);
    let here = [500.0, 500.0, 0.0];
    let vehicles = vec![vehicle(0, here), vehicle(1, here)];
    // The LUAV can serve one of the two tasks; the RSUs have room for both.
    let nodes = nodes(
        [([600.0, 500.0, 0.0], 8e9, 8e9), ([1500.0, 1500.0, 0.0], 8e9, 8e9)],
        ([500.0, 500.0, 20.0], 3e8),
    );
    let shadow = ones(2, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 4, shadowing: &shadow };
    let luav_only = [0.0, 0.0, 1.0, 0.0, 0.0];
    let decisions = vec![OffloadDecision::unresolved(0, luav_only), OffloadDecision::unresolved(1, luav_only)];
    let tasks = [task(0, 1), task(1, 3)];

    let out = schedule(&ctx, &decisions, &tasks, TaskOrder::Priority);
    assert_eq!(out[1].target[Mode::Luav.index()], Some(2));
    assert_eq!(out[1].lambda[Mode::Luav.index()], 1.0);
    assert_eq!(out[0].lambda[Mode::Luav.index()], 0.0);
    assert_eq!(out[0].target[Mode::Rsu.index()], Some(0));
    assert_eq!(out[0].lambda[Mode::Rsu.index()], 1.0);

    // Arrival order hands the LUAV to vehicle 0 instead.
    let fifo = schedule(&ctx, &decisions, &tasks, TaskOrder::Fifo);
    assert_eq!(fifo[0].target[Mode::Luav.index()], Some(2));
    assert_eq!(fifo[1].target[Mode::Rsu.index()], Some(0));
}

#[test]
fn higher_score_rsu_is_selected() {
    let scn = scenario(1);
    let vehicles = vec![vehicle(0, [500.0, 500.0, 0.0])];
    // Scores with alpha = beta = 0.5: 0.5/100 + 0.5*0.5 = 0.255 and 0.5/50 + 0.5*0.58 = 0.3.
    let nodes = nodes(
        [([600.0, 500.0, 0.0], 8e9, 4e9), ([500.0, 550.0, 0.0], 8e9, 0.58 * 8e9)],
        ([1900.0, 1900.0, 20.0], 5e9),
    );
    let shadow = ones(1, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 4, shadowing: &shadow };
    let out = schedule(
        &ctx,
        &[OffloadDecision::unresolved(0, [0.0, 1.0, 0.0, 0.0, 0.0])],
        &[task(0, 2)],
        TaskOrder::Priority,
    );
    assert_eq!(out[0].target[Mode::Rsu.index()], Some(1));
}

#[test]
fn nodes_at_the_eligibility_threshold_are_skipped() {
    let scn = scenario(1);
    let vehicles = vec![vehicle(0, [500.0, 500.0, 0.0])];
    let nodes = nodes(
        [([600.0, 500.0, 0.0], 8e9, 2.4e9), ([1900.0, 1900.0, 0.0], 8e9, 8e9)],
        ([500.0, 500.0, 20.0], 5e9),
    );
    let shadow = ones(1, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 4, shadowing: &shadow };
    let out = schedule(
        &ctx,
        &[OffloadDecision::unresolved(0, [0.0, 1.0, 0.0, 0.0, 0.0])],
        &[task(0, 2)],
        TaskOrder::Priority,
    );
    // RSU 0 sits at exactly 30 % and RSU 1 is out of range, so the share
    // continues down the chain to the relay path.
    assert_eq!(out[0].lambda[Mode::Rsu.index()], 0.0);
    assert_eq!(out[0].lambda[Mode::HuavRsu.index()], 1.0);
    assert_eq!(out[0].target[Mode::HuavRsu.index()], Some(1));
}

#[test]
fn shares_that_cannot_arrive_in_time_fall_back() {
    let scn = scenario(1);
    let vehicles = vec![vehicle(0, [500.0, 500.0, 0.0])];
    let nodes = nodes(
        [([600.0, 500.0, 0.0], 8e9, 8e9), ([1900.0, 1900.0, 0.0], 8e9, 8e9)],
        ([1900.0, 1900.0, 20.0], 5e9),
    );
    let shadow = ones(1, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 4, shadowing: &shadow };
    // A gigabyte upload cannot finish inside one second on any link.
    let big = Task { data_size: 1e9, ..task(0, 2) };
    let out = schedule(&ctx, &[OffloadDecision::unresolved(0, [0.0, 1.0, 0.0, 0.0, 0.0])], &[big], TaskOrder::Priority);
    assert_eq!(out[0].lambda[Mode::Local.index()], 1.0);
    assert!(out[0].target.iter().all(Option::is_none));
    assert!(out[0].alloc.iter().all(|&a| a == 0.0));
}

#[test]
fn two_tasks_two_identical_nodes_reach_the_optimum() {
    let mut cfg = SimConfig::desk();
    cfg.network.num_vehicles = 2;
    cfg.network.num_rsus = 2;
    cfg.network.num_luavs = 0;
    let scn = cfg.validate().unwrap();
    let vehicles = vec![vehicle(0, [500.0, 500.0, 0.0]), vehicle(1, [500.0, 500.0, 0.0])];
    let nodes = vec![
        node(0, NodeKind::Rsu, [600.0, 500.0, 0.0], 8e9, 8e9),
        node(1, NodeKind::Rsu, [400.0, 500.0, 0.0], 8e9, 8e9),
        node(2, NodeKind::Bs, [0.0, 0.0, 0.0], 10e9, 10e9),
        node(3, NodeKind::Huav, [1000.0, 1000.0, 100.0], 0.0, 0.0),
    ];
    let shadow = ones(2, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 3, shadowing: &shadow };
    let decisions = vec![
        OffloadDecision::unresolved(0, [0.2, 0.8, 0.0, 0.0, 0.0]),
        OffloadDecision::unresolved(1, [0.2, 0.8, 0.0, 0.0, 0.0]),
    ];
    let tasks = [task(0, 1), task(1, 2)];
    let greedy = schedule(&ctx, &decisions, &tasks, TaskOrder::Priority);
    let best = brute_force_schedule(&ctx, &decisions, &tasks).unwrap();
    let r = schedule_reward(&ctx, &tasks, &greedy);
    assert!(r <= best.reward + 1e-12);
    assert!((r - best.reward).abs() < 1e-12, "greedy {r} vs optimum {}", best.reward);
}

#[test]
fn greedy_never_beats_the_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let n = rng.random_range(1..=4);
        let mut cfg = SimConfig::desk();
        cfg.network.num_vehicles = n;
        cfg.network.num_rsus = rng.random_range(1..=2);
        cfg.network.num_luavs = rng.random_range(0..=1);
        cfg.network.area_side = 1000.0;
        let scn = cfg.validate().unwrap();
        let w = uavec::env::World::reset(&scn, rng.random());
        let shadow = ones(n, w.nodes.len());
        let ctx = SlotContext { scn: &scn, vehicles: &w.vehicles, nodes: &w.nodes, huav: w.huav(), shadowing: &shadow };
        let decisions: Vec<_> = (0..n)
            .map(|i| {
                let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..=1.0)).collect();
                OffloadDecision::unresolved(i, lambda_from_logits(&raw, 0.01))
            })
            .collect();
        let greedy = schedule(&ctx, &decisions, &w.tasks, TaskOrder::Priority);
        let best = brute_force_schedule(&ctx, &decisions, &w.tasks).unwrap();
        assert!(best.leaves >= 1);
        assert!(schedule_reward(&ctx, &w.tasks, &greedy) <= best.reward + 1e-12);
        let used = node_allocations(&best.decisions, w.nodes.len());
        assert!(w.nodes.iter().zip(&used).all(|(x, u)| *u <= x.cpu_total * (1.0 + 1e-12)));
    }
}

#[test]
fn single_task_single_node_has_one_assignment() {
    let mut cfg = SimConfig::desk();
    cfg.network.num_vehicles = 1;
    cfg.network.num_rsus = 1;
    cfg.network.num_luavs = 0;
    let scn = cfg.validate().unwrap();
    let vehicles = vec![vehicle(0, [500.0, 500.0, 0.0])];
    let nodes = vec![
        node(0, NodeKind::Rsu, [600.0, 500.0, 0.0], 8e9, 8e9),
        node(1, NodeKind::Bs, [0.0, 0.0, 0.0], 10e9, 10e9),
        node(2, NodeKind::Huav, [1000.0, 1000.0, 100.0], 0.0, 0.0),
    ];
    let shadow = ones(1, nodes.len());
    let ctx = SlotContext { scn: &scn, vehicles: &vehicles, nodes: &nodes, huav: 2, shadowing: &shadow };
    let decisions = [OffloadDecision::unresolved(0, [0.5, 0.5, 0.0, 0.0, 0.0])];
    let tasks = [task(0, 1)];
    let best = brute_force_schedule(&ctx, &decisions, &tasks).unwrap();
    assert_eq!(best.leaves, 1);
    assert_eq!(best.decisions, schedule(&ctx, &decisions, &tasks, TaskOrder::Priority));

    let empty = brute_force_schedule(&ctx, &[], &[]).unwrap();
    assert!(empty.decisions.is_empty());
}
