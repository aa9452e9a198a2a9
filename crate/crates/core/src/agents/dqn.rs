//! Deep Q-network over a factorised discrete action space.
//!
//! One network outputs a block of Q-values per head (one head per vehicle,
//! one per LUAV). Heads act independently; every head regresses onto the
//! shared target `r + γ(1−done)·mean_h max_a Q̄_h(s′, a)`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::nn::{Adam, Mlp};
use super::replay::Batch;
use crate::config::Scenario;
use crate::scalar::Scalar;

/// Canonical split templates over (local, RSU, LUAV, HUAV-RSU, HUAV-BS).
pub const LAMBDA_TEMPLATES: [[f64; 5]; 7] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
    [0.2, 0.2, 0.2, 0.2, 0.2],
    [0.5, 0.0, 0.5, 0.0, 0.0],
];

/// LUAV controls as raw (heading, speed): hover, then east, north, west and
/// south at half speed.
pub const LUAV_CONTROLS: [[f64; 2]; 5] =
    [[-1.0, -1.0], [-1.0, 0.0], [-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]];

#[derive(Debug, Clone)]
pub struct Dqn<T> {
    pub heads: Vec<usize>,
    pub net: Mlp<T>,
    pub target: Mlp<T>,
    pub gamma: T,
    pub tau: T,
    opt: Adam<T>,
}

/// Raw logits that the action mapping turns back into `template`: shares
/// present get +1, absent shares get −1 and fall below the drop threshold.
pub fn template_logits(template: &[f64; 5]) -> [f64; 5] {
    let max = template.iter().copied().fold(0.0, f64::max);
    let mut out = [-1.0; 5];
    for (o, &t) in out.iter_mut().zip(template) {
        if t > 0.0 {
            *o = 2.0 * t / max - 1.0;
        }
    }
    out
}

/// Head sizes for a scenario: seven templates per vehicle, five controls per LUAV.
pub fn env_heads(scn: &Scenario) -> Vec<usize> {
    let mut h = vec![LAMBDA_TEMPLATES.len(); scn.num_vehicles()];
    h.extend(std::iter::repeat_n(LUAV_CONTROLS.len(), scn.num_luavs()));
    h
}

/// Raw continuous action for a vector of per-head choices.
pub fn raw_action(choice: &[usize], scn: &Scenario) -> Vec<f64> {
    let i = scn.num_vehicles();
    let mut raw = Vec::with_capacity(scn.num_action());
    for &c in &choice[..i] {
        raw.extend(template_logits(&LAMBDA_TEMPLATES[c]));
    }
    for &c in &choice[i..] {
        raw.extend(LUAV_CONTROLS[c]);
    }
    raw
}

impl<T: Scalar> Dqn<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        heads: Vec<usize>,
        hidden: &[usize],
        lr: f64,
        gamma: f64,
        tau: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend(hidden);
        sizes.push(heads.iter().sum());
        let net = Mlp::new(&sizes, rng).expect("positive sizes");
        Self {
            heads,
            target: net.clone(),
            opt: Adam::new(&net, T::of(lr)),
            net,
            gamma: T::of(gamma),
            tau: T::of(tau),
        }
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.heads.len());
        let mut acc = 0;
        for &h in &self.heads {
            o.push(acc);
            acc += h;
        }
        o
    }

    pub fn q_values(&self, obs: &[T]) -> Vec<T> {
        self.net.forward_one(obs).expect("observation width")
    }

    pub fn greedy(&self, obs: &[T]) -> Vec<usize> {
        let q = self.q_values(obs);
        self.offsets()
            .iter()
            .zip(&self.heads)
            .map(|(&o, &h)| argmax(&q[o..o + h]))
            .collect()
    }

    /// With probability ε a uniformly random joint action, else the per-head argmax.
    pub fn policy<R: Rng + ?Sized>(&self, obs: &[T], epsilon: f64, rng: &mut R) -> Vec<usize> {
        if rng.random_bool(epsilon.clamp(0.0, 1.0)) {
            self.heads.iter().map(|&h| rng.random_range(0..h)).collect()
        } else {
            self.greedy(obs)
        }
    }

    /// One TD step; actions in the batch hold the chosen index per head.
    /// Returns the mean squared TD error.
    pub fn update(&mut self, b: &Batch<T>) -> f64 {
        let n = b.obs.nrows();
        let offs = self.offsets();
        let nh = T::of(self.heads.len() as f64);
        let next = self.target.forward(b.next_obs.view()).expect("observation width");
        let tape = self.net.forward_tape(b.obs.view()).expect("observation width");
        let q = tape.output();
        let mut g = Array2::zeros(q.raw_dim());
        let scale = T::one() / (T::of(n as f64) * nh);
        let mut loss = T::zero();
        for r in 0..n {
            let mut boot = T::zero();
            for (&o, &h) in offs.iter().zip(&self.heads) {
                let row = next.row(r);
                let best = row.slice(ndarray::s![o..o + h]).iter().copied().fold(T::neg_infinity(), T::max);
                boot = boot + best;
            }
            let y = b.reward[r] + self.gamma * (T::one() - b.done[r]) * boot / nh;
            for (k, &o) in offs.iter().enumerate() {
                let a = b.action[[r, k]].as_f64() as usize;
                let d = q[[r, o + a]] - y;
                loss = loss + d * d * scale;
                g[[r, o + a]] = T::of(2.0) * d * scale;
            }
        }
        let (grads, _) = self.net.backward(&tape, g);
        self.opt.step(&mut self.net, &grads);
        self.target.soft_update(&self.net, self.tau);
        loss.as_f64()
    }

    pub fn q_batch(&self, obs: ArrayView2<T>) -> Array2<T> {
        self.net.forward(obs).expect("observation width")
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax<T: Scalar>(x: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Linear decay from `start` to `end` over `steps`.
pub fn epsilon_at(step: usize, start: f64, end: f64, steps: usize) -> f64 {
    if steps == 0 || step >= steps {
        end
    } else {
        start + (end - start) * step as f64 / steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::env::lambda_from_logits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn templates_survive_the_action_mapping() {
        for t in LAMBDA_TEMPLATES {
            let l = lambda_from_logits(&template_logits(&t), 0.01);
            for (a, b) in l.iter().zip(&t) {
                assert!((a - b).abs() < 1e-5, "{l:?} vs {t:?}");
            }
        }
    }

    #[test]
    fn zero_epsilon_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Dqn::<f64>::new(3, vec![4, 2], &[8], 1e-3, 0.9, 0.01, &mut rng);
        let obs = [0.1, 0.2, 0.3];
        let q = d.q_values(&obs);
        let pick = d.policy(&obs, 0.0, &mut rng);
        assert_eq!(pick, vec![argmax(&q[..4]), argmax(&q[4..])]);
    }

    #[test]
    fn env_action_has_the_right_width() {
        let scn = SimConfig::desk().validate().unwrap();
        let heads = env_heads(&scn);
        let choice: Vec<usize> = heads.iter().map(|h| h - 1).collect();
        let raw = raw_action(&choice, &scn);
        assert_eq!(raw.len(), scn.num_action());
        assert!(raw.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_at(0, 1.0, 0.1, 10), 1.0);
        assert!((epsilon_at(5, 1.0, 0.1, 10) - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(50, 1.0, 0.1, 10), 0.1);
    }
}
