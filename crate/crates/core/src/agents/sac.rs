//! Soft actor-critic with twin critics, target networks and automatic
//! temperature tuning.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::nn::{Adam, Grads, Mlp, ScalarAdam};
use super::replay::Batch;
use crate::config::AgentConfig;
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("non-finite {stage} (critic1 {critic1}, critic2 {critic2}, actor {actor}, alpha {alpha}, log_alpha {log_alpha})")]
    NonFinite {
        stage: &'static str,
        critic1: f64,
        critic2: f64,
        actor: f64,
        alpha: f64,
        log_alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacHyper {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub init_alpha: f64,
    pub target_entropy: f64,
    /// When false the temperature stays at `init_alpha`.
    pub auto_alpha: bool,
}

impl SacHyper {
    pub fn from_config(a: &AgentConfig, act_dim: usize) -> Self {
        Self {
            hidden: a.hidden.clone(),
            gamma: a.gamma,
            tau: a.tau,
            lr_actor: a.lr_actor,
            lr_critic: a.lr_critic,
            lr_alpha: a.lr_alpha,
            init_alpha: a.init_alpha,
            target_entropy: a.target_entropy.unwrap_or(-(act_dim as f64)),
            auto_alpha: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub alpha: f64,
    /// Temperature after the update.
    pub alpha_value: f64,
    /// Batch estimate of the policy entropy.
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Sac<T> {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp<T>,
    pub q1: Mlp<T>,
    pub q2: Mlp<T>,
    pub q1_targ: Mlp<T>,
    pub q2_targ: Mlp<T>,
    pub log_alpha: T,
    pub gamma: T,
    pub tau: T,
    pub target_entropy: T,
    pub auto_alpha: bool,
    opt_actor: Adam<T>,
    opt_q1: Adam<T>,
    opt_q2: Adam<T>,
    opt_alpha: ScalarAdam<T>,
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh2<T: Scalar>(u: T) -> T {
    T::of(2.0) * (T::LN_2() - u - softplus(T::of(-2.0) * u))
}

pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Squashed Gaussian sample for one dimension: `(a, log_prob term, u)`.
pub fn squash<T: Scalar>(mean: T, log_std: T, eps: T) -> (T, T, T) {
    let u = mean + log_std.exp() * eps;
    let half_ln_2pi = T::of(0.5 * (2.0 * std::f64::consts::PI).ln());
    let logp = -T::of(0.5) * eps * eps - log_std - half_ln_2pi - log_one_minus_tanh2(u);
    (u.tanh(), logp, u)
}

fn clamp_log_std<T: Scalar>(x: T) -> (T, bool) {
    let (lo, hi) = (T::of(LOG_STD_MIN), T::of(LOG_STD_MAX));
    if x < lo {
        (lo, false)
    } else if x > hi {
        (hi, false)
    } else {
        (x, true)
    }
}

fn normals<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = rng.sample(StandardNormal);
        T::of(z)
    })
}

fn mean<T: Scalar>(x: &Array1<T>) -> T {
    x.sum() / T::of(x.len() as f64)
}

struct PolicyOut<T> {
    a: Array2<T>,
    logp: Array1<T>,
    std: Array2<T>,
    eps: Array2<T>,
    /// 1 where log-std was inside its clamp range.
    ls_free: Array2<T>,
}

impl<T: Scalar> Sac<T> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, h: &SacHyper, rng: &mut R) -> Self {
        let mut asizes = vec![obs_dim];
        asizes.extend(&h.hidden);
        asizes.push(2 * act_dim);
        let mut qsizes = vec![obs_dim + act_dim];
        qsizes.extend(&h.hidden);
        qsizes.push(1);
        let actor = Mlp::new(&asizes, rng).expect("positive sizes");
        let q1 = Mlp::new(&qsizes, rng).expect("positive sizes");
        let q2 = Mlp::new(&qsizes, rng).expect("positive sizes");
        Self {
            obs_dim,
            act_dim,
            opt_actor: Adam::new(&actor, T::of(h.lr_actor)),
            opt_q1: Adam::new(&q1, T::of(h.lr_critic)),
            opt_q2: Adam::new(&q2, T::of(h.lr_critic)),
            opt_alpha: ScalarAdam::new(T::of(h.lr_alpha)),
            q1_targ: q1.clone(),
            q2_targ: q2.clone(),
            actor,
            q1,
            q2,
            log_alpha: T::of(h.init_alpha.ln()),
            gamma: T::of(h.gamma),
            tau: T::of(h.tau),
            target_entropy: T::of(h.target_entropy),
            auto_alpha: h.auto_alpha,
        }
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.exp()
    }

    /// Raw actor head split into `(mean, clamped log-std, free mask)`.
    fn heads(&self, out: &Array2<T>) -> (Array2<T>, Array2<T>, Array2<T>) {
        let m = self.act_dim;
        let mean = out.slice(s![.., ..m]).to_owned();
        let raw = out.slice(s![.., m..]);
        let mut ls = Array2::zeros(raw.raw_dim());
        let mut free = Array2::zeros(raw.raw_dim());
        for ((l, f), &r) in ls.iter_mut().zip(free.iter_mut()).zip(raw.iter()) {
            let (v, inside) = clamp_log_std(r);
            *l = v;
            *f = if inside { T::one() } else { T::zero() };
        }
        (mean, ls, free)
    }

    fn policy(&self, out: &Array2<T>, eps: Array2<T>) -> PolicyOut<T> {
        let (mean, ls, ls_free) = self.heads(out);
        let rows = mean.nrows();
        let mut a = Array2::zeros(mean.raw_dim());
        let mut logp = Array1::zeros(rows);
        for r in 0..rows {
            let mut lp = T::zero();
            for j in 0..self.act_dim {
                let (aj, lj, _) = squash(mean[[r, j]], ls[[r, j]], eps[[r, j]]);
                a[[r, j]] = aj;
                lp = lp + lj;
            }
            logp[r] = lp;
        }
        PolicyOut { a, logp, std: ls.mapv(|v| v.exp()), eps, ls_free }
    }

    /// Samples `(action in (-1, 1)^dim, log_prob)`; with `deterministic` the
    /// action is `tanh(mean)`.
    pub fn actor_sample<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R, deterministic: bool) -> (Vec<T>, T) {
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("observation row");
        let out = self.actor.forward(x).expect("observation width");
        let eps = if deterministic { Array2::zeros((1, self.act_dim)) } else { normals(1, self.act_dim, rng) };
        let p = self.policy(&out, eps);
        (p.a.row(0).to_vec(), p.logp[0])
    }

    fn q_input(obs: &Array2<T>, act: &Array2<T>) -> Array2<T> {
        concatenate![Axis(1), obs.view(), act.view()]
    }

    /// Soft Bellman target `r + γ(1−done)(min Q̄(s′, a′) − α log π(a′|s′))`.
    pub fn critic_target<R: Rng + ?Sized>(&self, b: &Batch<T>, rng: &mut R) -> Array1<T> {
        let n = b.obs.nrows();
        let out = self.actor.forward(b.next_obs.view()).expect("observation width");
        let p = self.policy(&out, normals(n, self.act_dim, rng));
        let x = Self::q_input(&b.next_obs, &p.a);
        let t1 = self.q1_targ.forward(x.view()).expect("critic width");
        let t2 = self.q2_targ.forward(x.view()).expect("critic width");
        let alpha = self.alpha();
        Array1::from_shape_fn(n, |r| {
            let q = t1[[r, 0]].min(t2[[r, 0]]) - alpha * p.logp[r];
            b.reward[r] + self.gamma * (T::one() - b.done[r]) * q
        })
    }

    fn diag(&self, stage: &'static str, l: &SacLosses) -> SacError {
        SacError::NonFinite {
            stage,
            critic1: l.critic1,
            critic2: l.critic2,
            actor: l.actor,
            alpha: l.alpha,
            log_alpha: self.log_alpha.as_f64(),
        }
    }

    /// One gradient step on both critics, the actor and the temperature,
    /// followed by a soft target update. Nothing is applied from a stage
    /// whose loss is non-finite.
    pub fn update<R: Rng + ?Sized>(&mut self, b: &Batch<T>, rng: &mut R) -> Result<SacLosses, SacError> {
        let n = b.obs.nrows();
        assert!(n >= 2, "SAC update needs a batch of at least two");
        let inv_n = T::one() / T::of(n as f64);
        let mut losses = SacLosses::default();

        // Critics.
        let y = self.critic_target(b, rng);
        let x = Self::q_input(&b.obs, &b.action);
        let critic_grads = |net: &Mlp<T>| -> (f64, Grads<T>) {
            let tape = net.forward_tape(x.view()).expect("critic width");
            let q = tape.output().column(0).to_owned();
            let diff = &q - &y;
            let loss = (diff.mapv(|d| d * d).sum() * inv_n).as_f64();
            let g = diff.mapv(|d| T::of(2.0) * d * inv_n).insert_axis(Axis(1));
            (loss, net.backward(&tape, g).0)
        };
        let (l1, g1) = critic_grads(&self.q1);
        let (l2, g2) = critic_grads(&self.q2);
        losses.critic1 = l1;
        losses.critic2 = l2;
        if !(l1.is_finite() && l2.is_finite() && g1.all_finite() && g2.all_finite()) {
            return Err(self.diag("critic loss", &losses));
        }
        self.opt_q1.step(&mut self.q1, &g1);
        self.opt_q2.step(&mut self.q2, &g2);

        // Actor.
        let eps = normals(n, self.act_dim, rng);
        let (actor_loss, ga, logp) = self.actor_pass(&b.obs, eps);
        losses.actor = actor_loss.as_f64();
        if !losses.actor.is_finite() {
            return Err(self.diag("actor loss", &losses));
        }
        if !ga.all_finite() {
            return Err(self.diag("actor gradient", &losses));
        }
        self.opt_actor.step(&mut self.actor, &ga);

        // Temperature.
        let gap = mean(&logp.mapv(|l| l + self.target_entropy));
        losses.alpha = (-self.log_alpha * gap).as_f64();
        losses.entropy = -mean(&logp).as_f64();
        if self.auto_alpha {
            if !losses.alpha.is_finite() {
                return Err(self.diag("temperature loss", &losses));
            }
            let mut la = self.log_alpha;
            self.opt_alpha.step(&mut la, -gap);
            self.log_alpha = la;
        }
        losses.alpha_value = self.alpha().as_f64();

        self.q1_targ.soft_update(&self.q1, self.tau);
        self.q2_targ.soft_update(&self.q2, self.tau);
        debug_assert!(self.actor.all_finite() && self.q1.all_finite() && self.q2.all_finite());
        Ok(losses)
    }

    /// Actor loss `mean(α log π − min Q)` on a fixed noise draw, its gradient
    /// with respect to the actor parameters, and the per-row log-probs.
    pub fn actor_pass(&self, obs: &Array2<T>, eps: Array2<T>) -> (T, Grads<T>, Array1<T>) {
        let n = obs.nrows();
        let inv_n = T::one() / T::of(n as f64);
        let tape = self.actor.forward_tape(obs.view()).expect("observation width");
        let p = self.policy(tape.output(), eps);
        let xa = Self::q_input(obs, &p.a);
        let t1 = self.q1.forward_tape(xa.view()).expect("critic width");
        let t2 = self.q2.forward_tape(xa.view()).expect("critic width");
        let alpha = self.alpha();
        let mut pick1 = Array2::zeros((n, 1));
        let mut pick2 = Array2::zeros((n, 1));
        let mut loss = T::zero();
        for r in 0..n {
            let (q1, q2) = (t1.output()[[r, 0]], t2.output()[[r, 0]]);
            if q1 <= q2 {
                pick1[[r, 0]] = -inv_n;
            } else {
                pick2[[r, 0]] = -inv_n;
            }
            loss = loss + alpha * p.logp[r] - q1.min(q2);
        }
        // dL/da through the selected critic, then through tanh and the
        // reparameterisation u = mean + std·eps. d log π / du = 2a.
        let dq = self.q1.input_grad(&t1, pick1) + self.q2.input_grad(&t2, pick2);
        let da = dq.slice(s![.., self.obs_dim..]);
        let m = self.act_dim;
        let alpha_n = alpha * inv_n;
        let mut g_out = Array2::zeros((n, 2 * m));
        for r in 0..n {
            for j in 0..m {
                let a = p.a[[r, j]];
                let g_u = alpha_n * T::of(2.0) * a + da[[r, j]] * (T::one() - a * a);
                g_out[[r, j]] = g_u;
                g_out[[r, m + j]] = (g_u * p.std[[r, j]] * p.eps[[r, j]] - alpha_n) * p.ls_free[[r, j]];
            }
        }
        let (grads, _) = self.actor.backward(&tape, g_out);
        (loss * inv_n, grads, p.logp)
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.q1.all_finite()
            && self.q2.all_finite()
            && self.q1_targ.all_finite()
            && self.q2_targ.all_finite()
            && self.log_alpha.is_finite()
    }
}
