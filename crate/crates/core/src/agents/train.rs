//! Episode loop shared by every agent kind.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dqn::{self, Dqn};
use super::normalize::ObsNormalizer;
use super::replay::ReplayBuffer;
use super::sac::{Sac, SacError, SacHyper};
use super::{pin_luav_speeds, random_action, AgentKind};
use crate::config::{Precision, Scenario};
use crate::env::trace::{observation_hash, TraceRecord, TraceWriter};
use crate::env::World;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("episode {episode}, slot {slot}: {source}")]
    NonFinite {
        episode: usize,
        slot: usize,
        #[source]
        source: SacError,
    },
    #[error("trace write failed: {0}")]
    Trace(#[from] std::io::Error),
}

/// Per-episode summary. Delay and energy are per-slot means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub reward: f64,
    /// Mean slot reward.
    pub utility: f64,
    pub completion_rate: f64,
    pub delay: f64,
    pub energy: f64,
    pub hard_violations: u32,
    pub huav_breaches: u32,
}

/// SplitMix64 finaliser, used to derive independent stream seeds.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const AGENT_STREAM: u64 = 0xA6E7;
const EVAL_STREAM: u64 = 0xE7A1;

#[derive(Debug, Clone)]
pub enum Learner<T> {
    Sac(Box<Sac<T>>),
    Dqn(Box<Dqn<T>>),
    Random,
}

#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub scn: Scenario,
    pub kind: AgentKind,
    pub seed: u64,
    pub norm: ObsNormalizer,
    pub learner: Learner<T>,
    pub buffer: ReplayBuffer<T>,
    pub steps: usize,
    rng: ChaCha8Rng,
}

fn cast<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::of(v)).collect()
}

impl<T: Scalar> Trainer<T> {
    pub fn new(scn: &Scenario, kind: AgentKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, AGENT_STREAM));
        let a = &scn.cfg.agent;
        let obs_dim = scn.num_observation();
        let (learner, act_width) = match kind {
            k if k.uses_sac() => {
                let h = SacHyper::from_config(a, scn.num_action());
                (Learner::Sac(Box::new(Sac::new(obs_dim, scn.num_action(), &h, &mut rng))), scn.num_action())
            }
            AgentKind::Dqn => {
                let heads = dqn::env_heads(scn);
                let w = heads.len();
                let d = Dqn::new(obs_dim, heads, &a.hidden, a.lr_critic, a.gamma, a.tau, &mut rng);
                (Learner::Dqn(Box::new(d)), w)
            }
            _ => (Learner::Random, 1),
        };
        let cap = if matches!(learner, Learner::Random) { 1 } else { a.buffer_capacity };
        Self {
            scn: scn.clone(),
            kind,
            seed,
            norm: ObsNormalizer::new(scn),
            learner,
            buffer: ReplayBuffer::new(cap, obs_dim, act_width),
            steps: 0,
            rng,
        }
    }

    /// Chooses a raw action plus the record stored in the replay buffer.
    fn act(&mut self, obs: &[T], explore: bool) -> (Vec<f64>, Vec<T>) {
        let scn = &self.scn;
        let warm = explore && self.steps < scn.cfg.agent.warmup_steps;
        match &self.learner {
            Learner::Random => (random_action(scn, &mut self.rng), vec![T::zero()]),
            Learner::Sac(sac) => {
                let mut raw = if warm {
                    random_action(scn, &mut self.rng)
                } else {
                    let (a, _) = sac.actor_sample(obs, &mut self.rng, !explore);
                    a.iter().map(|v| v.as_f64()).collect()
                };
                if self.kind == AgentKind::FixedUav {
                    pin_luav_speeds(&mut raw, scn);
                }
                let stored = cast(&raw);
                (raw, stored)
            }
            Learner::Dqn(d) => {
                let a = &scn.cfg.agent;
                let eps = if explore {
                    dqn::epsilon_at(self.steps, a.dqn_epsilon_start, a.dqn_epsilon_end, a.dqn_epsilon_decay_steps)
                } else {
                    0.0
                };
                let choice = d.policy(obs, eps, &mut self.rng);
                let stored = choice.iter().map(|&c| T::of(c as f64)).collect();
                (dqn::raw_action(&choice, scn), stored)
            }
        }
    }

    fn learn(&mut self) -> Result<(), SacError> {
        let a = &self.scn.cfg.agent;
        if self.steps < a.warmup_steps
            || self.buffer.len() < a.batch_size.max(2)
            || self.steps % a.update_every.max(1) != 0
        {
            return Ok(());
        }
        let batch = self.buffer.sample(a.batch_size.max(2), &mut self.rng);
        match &mut self.learner {
            Learner::Sac(sac) => sac.update(&batch, &mut self.rng).map(|_| ()),
            Learner::Dqn(d) => {
                d.update(&batch);
                Ok(())
            }
            Learner::Random => Ok(()),
        }
    }

    /// Runs one episode. With `learn` the agent explores, stores transitions
    /// and updates; otherwise it acts deterministically.
    pub fn run_episode<W: std::io::Write>(
        &mut self,
        episode: usize,
        env_seed: u64,
        learn: bool,
        mut trace: Option<&mut TraceWriter<W>>,
    ) -> Result<EpisodeMetrics, TrainError> {
        let mut world = World::with_options(&self.scn, env_seed, self.kind.env_options());
        let mut obs_raw = world.observation();
        let mut obs: Vec<T> = cast(&self.norm.apply(&obs_raw));
        let mut m = EpisodeMetrics {
            episode,
            reward: 0.0,
            utility: 0.0,
            completion_rate: 0.0,
            delay: 0.0,
            energy: 0.0,
            hard_violations: 0,
            huav_breaches: 0,
        };
        let mut slots = 0usize;
        while !world.done() {
            let (raw, stored) = self.act(&obs, learn);
            let out = world.step(&raw);
            let next: Vec<T> = cast(&self.norm.apply(&out.observation));
            if let Some(t) = trace.as_deref_mut() {
                t.write(&TraceRecord {
                    episode,
                    slot: slots,
                    obs_hash: observation_hash(&obs_raw),
                    action: raw.clone(),
                    reward: out.reward,
                    metrics: out.metrics.clone(),
                })?;
            }
            if learn && !matches!(self.learner, Learner::Random) {
                self.buffer.push(&obs, &stored, T::of(out.reward), &next, out.done);
                self.steps += 1;
                self.learn().map_err(|source| TrainError::NonFinite { episode, slot: slots, source })?;
            }
            m.reward += out.reward;
            m.completion_rate += out.metrics.completion_rate;
            m.delay += out.metrics.total_delay;
            m.energy += out.metrics.system_energy;
            m.hard_violations += out.metrics.violations.hard();
            m.huav_breaches += out.metrics.violations.huav_budget;
            obs = next;
            obs_raw = out.observation;
            slots += 1;
        }
        let n = slots.max(1) as f64;
        m.utility = m.reward / n;
        m.completion_rate /= n;
        m.delay /= n;
        m.energy /= n;
        Ok(m)
    }
}

/// A trainer at the precision selected by the configuration.
#[derive(Debug, Clone)]
pub enum Agent {
    F32(Trainer<f32>),
    F64(Trainer<f64>),
}

macro_rules! both {
    ($self:expr, $t:ident => $e:expr) => {
        match $self {
            Agent::F32($t) => $e,
            Agent::F64($t) => $e,
        }
    };
}

impl Agent {
    pub fn new(scn: &Scenario, kind: AgentKind, seed: u64) -> Self {
        match scn.cfg.agent.precision {
            Precision::F32 => Agent::F32(Trainer::new(scn, kind, seed)),
            Precision::F64 => Agent::F64(Trainer::new(scn, kind, seed)),
        }
    }

    pub fn kind(&self) -> AgentKind {
        both!(self, t => t.kind)
    }

    pub fn seed(&self) -> u64 {
        both!(self, t => t.seed)
    }

    pub fn scenario(&self) -> &Scenario {
        both!(self, t => &t.scn)
    }

    pub fn run_episode<W: std::io::Write>(
        &mut self,
        episode: usize,
        env_seed: u64,
        learn: bool,
        trace: Option<&mut TraceWriter<W>>,
    ) -> Result<EpisodeMetrics, TrainError> {
        both!(self, t => t.run_episode(episode, env_seed, learn, trace))
    }
}

/// Trains for `episodes` episodes. Everything is derived from `seed`, so two
/// calls with the same arguments return identical metrics.
pub fn train<W: std::io::Write>(
    scn: &Scenario,
    kind: AgentKind,
    episodes: usize,
    seed: u64,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<(Agent, Vec<EpisodeMetrics>), TrainError> {
    let mut agent = Agent::new(scn, kind, seed);
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        out.push(agent.run_episode(ep, mix(seed, ep as u64), true, trace.as_deref_mut())?);
    }
    Ok((agent, out))
}

/// Greedy rollouts on episodes disjoint from the training stream.
pub fn evaluate<W: std::io::Write>(
    agent: &mut Agent,
    episodes: usize,
    seed: u64,
    mut trace: Option<&mut TraceWriter<W>>,
) -> Result<Vec<EpisodeMetrics>, TrainError> {
    (0..episodes)
        .map(|ep| agent.run_episode(ep, mix(mix(seed, EVAL_STREAM), ep as u64), false, trace.as_deref_mut()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn tiny() -> Scenario {
        let mut cfg = SimConfig::desk();
        cfg.network.num_vehicles = 3;
        cfg.network.num_luavs = 1;
        cfg.network.num_slots = 10;
        cfg.agent.hidden = vec![16];
        cfg.agent.batch_size = 8;
        cfg.agent.warmup_steps = 10;
        cfg.validate().unwrap()
    }

    type NoTrace = TraceWriter<std::io::Sink>;

    #[test]
    fn zero_episodes() {
        let (_, m) = train(&tiny(), AgentKind::Sac, 0, 1, None::<&mut NoTrace>).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn same_seed_same_metrics() {
        for kind in AgentKind::ALL {
            let (_, a) = train(&tiny(), kind, 3, 7, None::<&mut NoTrace>).unwrap();
            let (_, b) = train(&tiny(), kind, 3, 7, None::<&mut NoTrace>).unwrap();
            assert_eq!(a, b, "{kind}");
            assert!(a.iter().all(|m| m.hard_violations == 0));
        }
    }

    #[test]
    fn fixed_uav_never_moves() {
        let scn = tiny();
        let mut agent = Trainer::<f64>::new(&scn, AgentKind::FixedUav, 3);
        let mut world = World::with_options(&scn, 5, AgentKind::FixedUav.env_options());
        let start: Vec<_> = world.luav_ids().map(|l| world.nodes[l].position).collect();
        while !world.done() {
            let obs = cast(&agent.norm.apply(&world.observation()));
            let (raw, _) = agent.act(&obs, true);
            world.step(&raw);
        }
        let end: Vec<_> = world.luav_ids().map(|l| world.nodes[l].position).collect();
        assert_eq!(start, end);
    }

    #[test]
    fn trace_has_one_line_per_slot() {
        let scn = tiny();
        let mut w = TraceWriter::new(Vec::new());
        train(&scn, AgentKind::Random, 2, 0, Some(&mut w)).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 2 * scn.cfg.network.num_slots);
    }
}
