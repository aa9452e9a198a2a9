//! Minimal dense network with hand-written reverse-mode gradients.
//!
//! Arrays are stored `(batch, features)`. Hidden layers use tanh, the output
//! layer is linear. Losses are reduced by the caller, so `backward` takes the
//! gradient of the already-reduced loss with respect to the network output.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input width {got} does not match network input {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("a network needs at least an input and an output size, got {0:?}")]
    BadSizes(Vec<usize>),
    #[error("parameter vector has {got} entries, network has {expected}")]
    ParamCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// Shape `(inputs, outputs)`.
    pub w: Array2<T>,
    pub b: Array1<T>,
    pub act: Activation,
}

impl<T: Scalar> Dense<T> {
    fn forward(&self, x: &ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&self.w);
        z += &self.b;
        if self.act == Activation::Tanh {
            z.mapv_inplace(|v| v.tanh());
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Activations kept from a forward pass: `acts[0]` is the input, `acts[k+1]`
/// the output of layer `k`.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub acts: Vec<Array2<T>>,
}

impl<T> Tape<T> {
    pub fn output(&self) -> &Array2<T> {
        self.acts.last().expect("tape holds at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub dw: Vec<Array2<T>>,
    pub db: Vec<Array1<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            dw: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            db: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    pub fn scale(&mut self, c: T) {
        for w in &mut self.dw {
            w.mapv_inplace(|v| v * c);
        }
        for b in &mut self.db {
            b.mapv_inplace(|v| v * c);
        }
    }

    pub fn add(&mut self, other: &Grads<T>) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            *a += b;
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            *a += b;
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.dw.iter().zip(&self.db) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.dw.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.db.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl<T: Scalar> Mlp<T> {
    /// Uniform Glorot initialisation; the output layer is scaled down so that
    /// initial outputs sit near zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        Self::build(sizes, |fan_in, fan_out, last| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() * if last { 0.1 } else { 1.0 };
            T::of(rng.random_range(-limit..=limit))
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        Self::build(sizes, |_, _, _| T::zero())
    }

    fn build(sizes: &[usize], mut init: impl FnMut(usize, usize, bool) -> T) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::BadSizes(sizes.to_vec()));
        }
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, p)| {
                let last = k + 1 == n;
                Dense {
                    w: Array2::from_shape_simple_fn((p[0], p[1]), || init(p[0], p[1], last)),
                    b: Array1::zeros(p[1]),
                    act: if last { Activation::Linear } else { Activation::Tanh },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check(&self, x: &ArrayView2<T>) -> Result<(), NnError> {
        if x.ncols() != self.input_size() {
            return Err(NnError::SizeMismatch { expected: self.input_size(), got: x.ncols() });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>, NnError> {
        self.check(&x)?;
        let mut h = self.layers[0].forward(&x);
        for l in &self.layers[1..] {
            h = l.forward(&h.view());
        }
        Ok(h)
    }

    pub fn forward_one(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        let x = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|_| NnError::SizeMismatch { expected: self.input_size(), got: x.len() })?;
        Ok(self.forward(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_tape(&self, x: ArrayView2<T>) -> Result<Tape<T>, NnError> {
        self.check(&x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let next = l.forward(&acts.last().expect("pushed").view());
            acts.push(next);
        }
        Ok(Tape { acts })
    }

    /// Gradients of the loss with respect to every parameter and to the input,
    /// given `grad_out` = dLoss/dOutput.
    pub fn backward(&self, tape: &Tape<T>, grad_out: Array2<T>) -> (Grads<T>, Array2<T>) {
        let n = self.layers.len();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        let mut g = grad_out;
        for (k, l) in self.layers.iter().enumerate().rev() {
            if l.act == Activation::Tanh {
                Zip::from(&mut g).and(&tape.acts[k + 1]).for_each(|g, &y| *g = *g * (T::one() - y * y));
            }
            dw.push(tape.acts[k].t().dot(&g));
            db.push(g.sum_axis(Axis(0)));
            g = g.dot(&l.w.t());
        }
        dw.reverse();
        db.reverse();
        (Grads { dw, db }, g)
    }

    /// Gradient with respect to the input only.
    pub fn input_grad(&self, tape: &Tape<T>, grad_out: Array2<T>) -> Array2<T> {
        let mut g = grad_out;
        for (k, l) in self.layers.iter().enumerate().rev() {
            if l.act == Activation::Tanh {
                Zip::from(&mut g).and(&tape.acts[k + 1]).for_each(|g, &y| *g = *g * (T::one() - y * y));
            }
            g = g.dot(&l.w.t());
        }
        g
    }

    /// `self ← τ·online + (1−τ)·self`.
    pub fn soft_update(&mut self, online: &Mlp<T>, tau: T) {
        let keep = T::one() - tau;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.w).and(&o.w).for_each(|t, &o| *t = tau * o + keep * *t);
            Zip::from(&mut t.b).and(&o.b).for_each(|t, &o| *t = tau * o + keep * *t);
        }
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, p: &[T]) -> Result<(), NnError> {
        if p.len() != self.num_params() {
            return Err(NnError::ParamCount { expected: self.num_params(), got: p.len() });
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense { w: l.w.mapv(|v| U::of(v.as_f64())), b: l.b.mapv(|v| U::of(v.as_f64())), act: l.act })
                .collect(),
        }
    }
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub t: i32,
    m: Grads<T>,
    v: Grads<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, lr: T) -> Self {
        Self {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, g: &Grads<T>) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = self.lr;
        let upd = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (k, l) in net.layers.iter_mut().enumerate() {
            Zip::from(&mut l.w).and(&mut self.m.dw[k]).and(&mut self.v.dw[k]).and(&g.dw[k]).for_each(
                |p, m, v, &g| upd(p, m, v, g),
            );
            Zip::from(&mut l.b).and(&mut self.m.db[k]).and(&mut self.v.db[k]).and(&g.db[k]).for_each(
                |p, m, v, &g| upd(p, m, v, g),
            );
        }
    }

    pub fn first_moment(&self) -> &Grads<T> {
        &self.m
    }
}

/// Adam on a single scalar (the SAC temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdam<T> {
    pub lr: T,
    pub t: i32,
    m: T,
    v: T,
}

impl<T: Scalar> ScalarAdam<T> {
    pub fn new(lr: T) -> Self {
        Self { lr, t: 0, m: T::zero(), v: T::zero() }
    }

    pub fn step(&mut self, p: &mut T, g: T) {
        let (b1, b2) = (T::of(0.9), T::of(0.999));
        self.t += 1;
        self.m = b1 * self.m + (T::one() - b1) * g;
        self.v = b2 * self.v + (T::one() - b2) * g * g;
        let mh = self.m / (T::one() - b1.powi(self.t));
        let vh = self.v / (T::one() - b2.powi(self.t));
        *p = *p - self.lr * mh / (vh.sqrt() + T::of(1e-8));
    }
}
