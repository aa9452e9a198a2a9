//! Fixed-capacity ring buffer of transitions stored in flat row-major arrays.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub obs: Array2<T>,
    pub action: Array2<T>,
    pub reward: Array1<T>,
    pub next_obs: Array2<T>,
    pub done: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<T>,
    action: Vec<T>,
    reward: Vec<T>,
    next_obs: Vec<T>,
    done: Vec<T>,
    len: usize,
    cursor: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: vec![T::zero(); capacity * obs_dim],
            action: vec![T::zero(); capacity * act_dim],
            reward: vec![T::zero(); capacity],
            next_obs: vec![T::zero(); capacity * obs_dim],
            done: vec![T::zero(); capacity],
            len: 0,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts one transition, overwriting the oldest once full.
    pub fn push(&mut self, obs: &[T], action: &[T], reward: T, next_obs: &[T], done: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        assert_eq!(action.len(), self.act_dim);
        let i = self.cursor;
        self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
        self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
        self.action[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(action);
        self.reward[i] = reward;
        self.done[i] = if done { T::one() } else { T::zero() };
        self.cursor = (self.cursor + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Stored transition at ring slot `i` as `(obs, action, reward, next_obs, done)`.
    pub fn get(&self, i: usize) -> (&[T], &[T], T, &[T], bool) {
        assert!(i < self.len);
        (
            &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim],
            &self.action[i * self.act_dim..(i + 1) * self.act_dim],
            self.reward[i],
            &self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim],
            self.done[i] > T::zero(),
        )
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch<T> {
        assert!(self.len > 0, "sampling from an empty buffer");
        let mut b = Batch {
            obs: Array2::zeros((n, self.obs_dim)),
            action: Array2::zeros((n, self.act_dim)),
            reward: Array1::zeros(n),
            next_obs: Array2::zeros((n, self.obs_dim)),
            done: Array1::zeros(n),
        };
        for row in 0..n {
            let i = rng.random_range(0..self.len);
            let (o, a, r, o2, d) = self.get(i);
            b.obs.row_mut(row).assign(&ndarray::ArrayView1::from(o));
            b.action.row_mut(row).assign(&ndarray::ArrayView1::from(a));
            b.next_obs.row_mut(row).assign(&ndarray::ArrayView1::from(o2));
            b.reward[row] = r;
            b.done[row] = if d { T::one() } else { T::zero() };
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn overwrites_oldest_first() {
        let mut buf = ReplayBuffer::<f64>::new(3, 1, 1);
        for k in 0..5 {
            let x = k as f64;
            buf.push(&[x], &[x], x, &[x], false);
        }
        assert_eq!(buf.len(), 3);
        let mut rewards: Vec<f64> = (0..3).map(|i| buf.get(i).2).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn samples_only_stored_transitions() {
        let mut buf = ReplayBuffer::<f32>::new(10, 2, 1);
        for k in 0..4 {
            let x = k as f32;
            buf.push(&[x, -x], &[x], 10.0 * x, &[x + 1.0, 0.0], k == 3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = buf.sample(64, &mut rng);
        for row in 0..64 {
            let x = b.obs[[row, 0]];
            assert!((0.0..4.0).contains(&x));
            assert_eq!(b.obs[[row, 1]], -x);
            assert_eq!(b.reward[row], 10.0 * x);
            assert_eq!(b.next_obs[[row, 0]], x + 1.0);
            assert_eq!(b.done[row], if x == 3.0 { 1.0 } else { 0.0 });
        }
    }
}
