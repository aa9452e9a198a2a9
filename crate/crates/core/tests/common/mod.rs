//! Fixtures shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavec::agents::dqn::Dqn;
use uavec::agents::replay::ReplayBuffer;
use uavec::agents::sac::{Sac, SacHyper};
use uavec::channel::sample_shadowing;
use uavec::env::{lambda_from_logits, World};
use uavec::{OffloadDecision, Scenario, SimConfig};

/// Discrete actions of the `-a²` bandit: -1, -0.8, ..., 1.
pub const BANDIT_ARMS: usize = 11;

pub fn bandit_arm(k: usize) -> f64 {
    -1.0 + 2.0 * k as f64 / (BANDIT_ARMS - 1) as f64
}

/// Trains SAC on the one-state `r = -a²` bandit and returns the
/// deterministic action after `updates` gradient steps.
pub fn sac_bandit(seed: u64, updates: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = SacHyper {
        hidden: vec![32],
        gamma: 0.0,
        tau: 0.01,
        lr_actor: 1e-3,
        lr_critic: 1e-3,
        lr_alpha: 1e-3,
        init_alpha: 0.1,
        target_entropy: -1.0,
        auto_alpha: true,
    };
    let mut sac = Sac::<f64>::new(1, 1, &h, &mut rng);
    let mut buf = ReplayBuffer::new(10_000, 1, 1);
    let obs = [1.0];
    let mut done = 0;
    while done < updates {
        let (a, _) = sac.actor_sample(&obs, &mut rng, false);
        buf.push(&obs, &a, -a[0] * a[0], &obs, true);
        if buf.len() >= 64 {
            let b = buf.sample(64, &mut rng);
            sac.update(&b, &mut rng).expect("finite bandit losses");
            done += 1;
        }
    }
    sac.actor_sample(&obs, &mut rng, true).0[0]
}

/// Trains a single-head DQN on the discrete bandit with uniform
/// exploration and returns its greedy arm.
pub fn dqn_bandit(seed: u64, updates: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dqn = Dqn::<f64>::new(1, vec![BANDIT_ARMS], &[16], 1e-2, 0.0, 0.05, &mut rng);
    let mut buf = ReplayBuffer::new(10_000, 1, 1);
    let obs = [1.0];
    for t in 0..updates + 32 {
        let k = dqn.policy(&obs, 1.0, &mut rng)[0];
        let a = bandit_arm(k);
        buf.push(&obs, &[k as f64], -a * a, &obs, true);
        if t >= 32 {
            dqn.update(&buf.sample(32, &mut rng));
        }
    }
    dqn.greedy(&obs)[0]
}

/// A random scheduling instance: partly loaded nodes, a shadowing draw and
/// random shares for every vehicle.
pub struct Instance {
    pub scn: Scenario,
    pub world: World,
    pub shadowing: Vec<Vec<f64>>,
    pub decisions: Vec<OffloadDecision>,
}

impl Instance {
    pub fn context(&self) -> uavec::slot::SlotContext<'_> {
        uavec::slot::SlotContext {
            scn: &self.scn,
            vehicles: &self.world.vehicles,
            nodes: &self.world.nodes,
            huav: self.world.huav(),
            shadowing: &self.shadowing,
        }
    }
}

/// At most four tasks and four compute nodes (RSUs + LUAVs + BS) on a
/// compact map. Nodes start the slot with their full CPU, as they do in the
/// environment.
pub fn oracle_instance(rng: &mut ChaCha8Rng) -> Instance {
    let mut cfg = SimConfig::desk();
    cfg.network.num_vehicles = rng.random_range(1..=4);
    cfg.network.num_rsus = rng.random_range(1..=2);
    cfg.network.num_luavs = rng.random_range(0..=(3 - cfg.network.num_rsus));
    cfg.network.area_side = rng.random_range(600.0..=1500.0);
    let scn = cfg.validate().expect("valid instance config");
    let world = World::reset(&scn, rng.random());
    let c = &scn.cfg.channel;
    let shadowing = (0..world.vehicles.len())
        .map(|_| (0..world.nodes.len()).map(|_| sample_shadowing(c.shadow_mu_db, c.shadow_sigma_db, rng)).collect())
        .collect();
    let decisions = (0..world.vehicles.len())
        .map(|i| {
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..=1.0)).collect();
            OffloadDecision::unresolved(i, lambda_from_logits(&raw, scn.cfg.scheduler.min_offload_fraction))
        })
        .collect();
    Instance { scn, world, shadowing, decisions }
}
