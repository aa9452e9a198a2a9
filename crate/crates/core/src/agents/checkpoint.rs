//! Versioned JSON dump of every parameter tensor of an agent, tagged with the
//! hash of the configuration it was trained on.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nn::Mlp;
use super::train::{Agent, Learner, Trainer};
use super::AgentKind;
use crate::config::{Precision, Scenario};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint was trained on config {found}, current config is {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("checkpoint format {0} is not supported (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("tensor '{0}' missing or mis-shaped")]
    Tensor(String),
    #[error("checkpoint precision {found:?} does not match config {expected:?}")]
    Precision { expected: Precision, found: Precision },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub agent: AgentKind,
    pub precision: Precision,
    pub seed: u64,
    pub steps: usize,
    pub log_alpha: Option<f64>,
    pub tensors: Vec<Tensor>,
}

fn dump<T: Scalar>(prefix: &str, net: &Mlp<T>, out: &mut Vec<Tensor>) {
    for (k, l) in net.layers.iter().enumerate() {
        out.push(Tensor {
            name: format!("{prefix}.{k}.w"),
            shape: l.w.shape().to_vec(),
            data: l.w.iter().map(|v| v.as_f64()).collect(),
        });
        out.push(Tensor {
            name: format!("{prefix}.{k}.b"),
            shape: l.b.shape().to_vec(),
            data: l.b.iter().map(|v| v.as_f64()).collect(),
        });
    }
}

fn restore<T: Scalar>(prefix: &str, net: &mut Mlp<T>, tensors: &[Tensor]) -> Result<(), CheckpointError> {
    let find = |name: String, shape: &[usize]| -> Result<Vec<T>, CheckpointError> {
        let t = tensors.iter().find(|t| t.name == name).ok_or_else(|| CheckpointError::Tensor(name.clone()))?;
        if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(CheckpointError::Tensor(name));
        }
        Ok(t.data.iter().map(|&v| T::of(v)).collect())
    };
    for (k, l) in net.layers.iter_mut().enumerate() {
        let w = find(format!("{prefix}.{k}.w"), l.w.shape())?;
        l.w = Array2::from_shape_vec(l.w.raw_dim(), w).expect("shape checked");
        let b = find(format!("{prefix}.{k}.b"), l.b.shape())?;
        l.b = Array1::from(b);
    }
    Ok(())
}

impl<T: Scalar> Trainer<T> {
    fn tensors(&self) -> (Vec<Tensor>, Option<f64>) {
        let mut out = Vec::new();
        match &self.learner {
            Learner::Sac(s) => {
                dump("actor", &s.actor, &mut out);
                dump("q1", &s.q1, &mut out);
                dump("q2", &s.q2, &mut out);
                dump("q1_targ", &s.q1_targ, &mut out);
                dump("q2_targ", &s.q2_targ, &mut out);
                (out, Some(s.log_alpha.as_f64()))
            }
            Learner::Dqn(d) => {
                dump("q", &d.net, &mut out);
                dump("q_targ", &d.target, &mut out);
                (out, None)
            }
            Learner::Random => (out, None),
        }
    }

    fn load_tensors(&mut self, c: &Checkpoint) -> Result<(), CheckpointError> {
        match &mut self.learner {
            Learner::Sac(s) => {
                restore("actor", &mut s.actor, &c.tensors)?;
                restore("q1", &mut s.q1, &c.tensors)?;
                restore("q2", &mut s.q2, &c.tensors)?;
                restore("q1_targ", &mut s.q1_targ, &c.tensors)?;
                restore("q2_targ", &mut s.q2_targ, &c.tensors)?;
                if let Some(la) = c.log_alpha {
                    s.log_alpha = T::of(la);
                }
            }
            Learner::Dqn(d) => {
                restore("q", &mut d.net, &c.tensors)?;
                restore("q_targ", &mut d.target, &c.tensors)?;
            }
            Learner::Random => {}
        }
        self.steps = c.steps;
        Ok(())
    }
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent) -> Self {
        let scn = agent.scenario();
        let (tensors, log_alpha, steps) = match agent {
            Agent::F32(t) => {
                let (x, a) = t.tensors();
                (x, a, t.steps)
            }
            Agent::F64(t) => {
                let (x, a) = t.tensors();
                (x, a, t.steps)
            }
        };
        Self {
            format_version: FORMAT_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: scn.cfg.hash(),
            agent: agent.kind(),
            precision: scn.cfg.agent.precision,
            seed: agent.seed(),
            steps,
            log_alpha,
            tensors,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reads a checkpoint and refuses it unless it was written for `scn`.
    pub fn load(path: impl AsRef<Path>, scn: &Scenario) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.check(scn)?;
        Ok(c)
    }

    pub fn check(&self, scn: &Scenario) -> Result<(), CheckpointError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(self.format_version));
        }
        let expected = scn.cfg.hash();
        if self.config_hash != expected {
            return Err(CheckpointError::HashMismatch { expected, found: self.config_hash.clone() });
        }
        if self.precision != scn.cfg.agent.precision {
            return Err(CheckpointError::Precision { expected: scn.cfg.agent.precision, found: self.precision });
        }
        Ok(())
    }

    /// Rebuilds the agent. Optimiser moments and the replay buffer are not
    /// stored, so the result is meant for evaluation.
    pub fn into_agent(&self, scn: &Scenario) -> Result<Agent, CheckpointError> {
        self.check(scn)?;
        let mut agent = Agent::new(scn, self.agent, self.seed);
        match &mut agent {
            Agent::F32(t) => t.load_tensors(self)?,
            Agent::F64(t) => t.load_tensors(self)?,
        }
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::train::train;
    use crate::config::SimConfig;
    use crate::env::trace::TraceWriter;

    fn tiny() -> Scenario {
        let mut cfg = SimConfig::desk();
        cfg.network.num_vehicles = 2;
        cfg.network.num_luavs = 1;
        cfg.network.num_slots = 6;
        cfg.agent.hidden = vec![8];
        cfg.agent.batch_size = 4;
        cfg.agent.warmup_steps = 4;
        cfg.validate().unwrap()
    }

    #[test]
    fn roundtrip_restores_parameters() {
        let scn = tiny();
        let (agent, _) = train(&scn, AgentKind::Sac, 2, 3, None::<&mut TraceWriter<std::io::Sink>>).unwrap();
        let c = Checkpoint::from_agent(&agent);
        let dir = std::env::temp_dir().join(format!("uavec-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.json");
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path, &scn).unwrap();
        assert_eq!(back, c);
        let rebuilt = back.into_agent(&scn).unwrap();
        assert_eq!(Checkpoint::from_agent(&rebuilt).tensors, c.tensors);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn refuses_other_config() {
        let scn = tiny();
        let agent = Agent::new(&scn, AgentKind::Dqn, 0);
        let c = Checkpoint::from_agent(&agent);
        let mut other = scn.cfg.clone();
        other.seed += 1;
        let err = c.check(&other.validate().unwrap()).unwrap_err();
        assert!(matches!(err, CheckpointError::HashMismatch { .. }));
    }
}
