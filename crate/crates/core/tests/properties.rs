//! Invariants of the formulas, the scheduler and the environment under random
//! inputs.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavec::channel::sample_shadowing;
use uavec::cost::{edge_cost, local_cost, relay_cost};
use uavec::env::{lambda_from_logits, World};
use uavec::scheduler::{node_allocations, schedule, score_node, Candidate, TaskOrder};
use uavec::slot::SlotContext;
use uavec::{db_to_linear, linear_to_db, Mode, OffloadDecision, Scenario, SimConfig, Task};

fn small_scenario(vehicles: usize, rsus: usize, luavs: usize, cpu_scale: f64) -> Scenario {
    let mut cfg = SimConfig::desk();
    cfg.network.num_vehicles = vehicles;
    cfg.network.num_rsus = rsus;
    cfg.network.num_luavs = luavs;
    cfg.network.area_side = 1200.0;
    cfg.nodes.rsu_cpu *= cpu_scale;
    cfg.nodes.luav_cpu *= cpu_scale;
    cfg.nodes.bs_cpu *= cpu_scale;
    cfg.validate().unwrap()
}

/// A world with partly used nodes, a shadowing draw and random shares.
fn random_slot(scn: &Scenario, seed: u64) -> (World, Vec<Vec<f64>>, Vec<OffloadDecision>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = World::reset(scn, rng.random());
    let huav = w.huav();
    for n in w.nodes.iter_mut().filter(|n| n.id != huav) {
        n.cpu_remaining = n.cpu_total * rng.random_range(0.2..=1.0);
    }
    let c = &scn.cfg.channel;
    let shadowing = (0..w.vehicles.len())
        .map(|_| (0..w.nodes.len()).map(|_| sample_shadowing(c.shadow_mu_db, c.shadow_sigma_db, &mut rng)).collect())
        .collect();
    let decisions = (0..w.vehicles.len())
        .map(|i| {
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..=1.0)).collect();
            OffloadDecision::unresolved(i, lambda_from_logits(&raw, scn.cfg.scheduler.min_offload_fraction))
        })
        .collect();
    (w, shadowing, decisions)
}

fn task(data: f64, cycles: f64) -> Task {
    Task { vehicle_id: 0, data_size: data, cycles, deadline: 1.0, priority: 1 }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #[test]
    fn db_roundtrip(x in -200.0f64..200.0) {
        prop_assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-9);
    }

    #[test]
    fn costs_are_homogeneous_in_the_share(
        l in 0.01f64..1.0,
        k in 0.01f64..1.0,
        d in 1e5f64..1e8,
        c in 1e7f64..1e10,
        rate in 1e5f64..1e9,
        f in 1e8f64..1e10,
    ) {
        let t = task(d, c);
        let kl = (k * l).min(1.0);
        let scale = kl / l;
        let a = local_cost(l, &t, f, 1e-28).unwrap();
        let b = local_cost(kl, &t, f, 1e-28).unwrap();
        prop_assert!(rel(b.delay, scale * a.delay) < 1e-12 && rel(b.energy, scale * a.energy) < 1e-12);
        let a = edge_cost(l, &t, rate, f, 1e-28, 0.1).unwrap();
        let b = edge_cost(kl, &t, rate, f, 1e-28, 0.1).unwrap();
        prop_assert!(rel(b.delay, scale * a.delay) < 1e-12 && rel(b.energy, scale * a.energy) < 1e-12);
        let a = relay_cost(l, &t, rate, 2.0 * rate, f, 1e-28, 0.1, 1.0).unwrap();
        let b = relay_cost(kl, &t, rate, 2.0 * rate, f, 1e-28, 0.1, 1.0).unwrap();
        prop_assert!(rel(b.delay, scale * a.delay) < 1e-12 && rel(b.energy, scale * a.energy) < 1e-12);
    }

    #[test]
    fn best_node_survives_weight_scaling(
        nodes in prop::collection::vec((1.0f64..1000.0, 0.31f64..1.0), 1..8),
        alpha in 0.01f64..2.0,
        beta in 0.01f64..2.0,
        k in 0.01f64..100.0,
    ) {
        let cands: Vec<Candidate> = nodes
            .iter()
            .enumerate()
            .map(|(i, &(distance, remain_fraction))| Candidate { node: i, distance, remain_fraction, score: 0.0 })
            .collect();
        let best = |a: f64, b: f64| {
            cands
                .iter()
                .max_by(|x, y| score_node(x, a, b).total_cmp(&score_node(y, a, b)))
                .map(|c| c.node)
        };
        let (s, t) = (best(alpha, beta), best(k * alpha, k * beta));
        // Scaling can only change the pick on an exact tie.
        if s != t {
            let (x, y) = (&cands[s.unwrap()], &cands[t.unwrap()]);
            prop_assert!(rel(score_node(x, alpha, beta), score_node(y, alpha, beta)) < 1e-12);
        }
    }

    #[test]
    fn schedule_conserves_mass_and_capacity(
        seed in any::<u64>(),
        vehicles in 1usize..12,
        rsus in 1usize..5,
        luavs in 0usize..4,
        cpu_scale in 0.05f64..1.0,
        fifo in any::<bool>(),
    ) {
        let scn = small_scenario(vehicles, rsus, luavs, cpu_scale);
        let (w, shadowing, decisions) = random_slot(&scn, seed);
        let ctx = SlotContext { scn: &scn, vehicles: &w.vehicles, nodes: &w.nodes, huav: w.huav(), shadowing: &shadowing };
        let order = if fifo { TaskOrder::Fifo } else { TaskOrder::Priority };
        let out = schedule(&ctx, &decisions, &w.tasks, order);
        prop_assert_eq!(out.len(), decisions.len());
        for d in &out {
            prop_assert!((d.lambda_sum() - 1.0).abs() < 1e-12);
            prop_assert!(d.lambda.iter().all(|&l| (0.0..=1.0).contains(&l)));
            for m in Mode::REMOTE {
                let k = m.index();
                prop_assert_eq!(d.lambda[k] > 0.0, d.target[k].is_some());
                if let Some(x) = d.target[k] {
                    prop_assert_eq!(Some(w.nodes[x].kind), m.target_kind());
                    prop_assert!(d.alloc[k] > 0.0);
                }
            }
        }
        let used = node_allocations(&out, w.nodes.len());
        for (n, u) in w.nodes.iter().zip(&used) {
            prop_assert!(*u <= n.cpu_remaining * (1.0 + 1e-12), "node {} used {} of {}", n.id, u, n.cpu_remaining);
        }
    }

    #[test]
    fn step_reward_matches_its_components(seed in any::<u64>(), slots in 1usize..6) {
        let scn = small_scenario(6, 4, 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = World::reset(&scn, seed);
        let r = &scn.cfg.reward;
        for _ in 0..slots {
            let raw: Vec<f64> = (0..scn.num_action()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let o = w.step(&raw);
            let m = &o.metrics;
            let expect = r.w_completion * m.completion_rate
                - r.w_delay * scn.delay_norm * m.total_delay
                - r.w_energy * scn.energy_norm * m.system_energy;
            prop_assert!((o.reward - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            prop_assert!((m.system_energy - m.compute_energy - m.uav_energy).abs() <= 1e-9 * m.system_energy);
            prop_assert!((m.offload_mass.iter().sum::<f64>() - scn.num_vehicles() as f64).abs() < 1e-9);
            prop_assert_eq!(m.violations.hard(), 0);
        }
    }
}
