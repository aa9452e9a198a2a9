//! Central finite-difference checks of the hand-written backward passes.

use ndarray::{concatenate, Array2, Axis};

use super::nn::Mlp;
use super::sac::Sac;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Absolute slack for coordinates whose true gradient is about zero.
pub const ABS_FLOOR: f64 = 1e-9;
/// Coordinates smaller than this are left out of `worst_rel`.
pub const REPORT_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradReport {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|a - n| / max(|a|, |n|)` over coordinates with `max(|a|, |n|)`
    /// above `REPORT_SCALE`.
    pub worst_rel: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }

    pub fn merge(&mut self, o: &GradReport) {
        self.checked += o.checked;
        self.failures += o.failures;
        self.worst_rel = self.worst_rel.max(o.worst_rel);
    }
}

pub fn agrees(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= REL_TOL * analytic.abs().max(numeric.abs()) + ABS_FLOOR
}

pub fn compare(analytic: &[f64], numeric: &[f64]) -> GradReport {
    assert_eq!(analytic.len(), numeric.len());
    let mut r = GradReport { checked: analytic.len(), ..Default::default() };
    for (&a, &n) in analytic.iter().zip(numeric) {
        if !agrees(a, n) {
            r.failures += 1;
        }
        let scale = a.abs().max(n.abs());
        if scale > REPORT_SCALE {
            r.worst_rel = r.worst_rel.max((a - n).abs() / scale);
        }
    }
    r
}

/// Central differences of `f` at `x`.
pub fn numeric_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + STEP;
            let up = f(&p);
            p[i] = x[i] - STEP;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn weighted_sum(net: &Mlp<f64>, x: &Array2<f64>, w: &Array2<f64>) -> f64 {
    (net.forward(x.view()).expect("input width") * w).sum()
}

/// Parameter gradient of `sum(net(x) ⊙ w)`.
pub fn mlp_params(net: &Mlp<f64>, x: &Array2<f64>, w: &Array2<f64>) -> GradReport {
    let tape = net.forward_tape(x.view()).expect("input width");
    let (g, _) = net.backward(&tape, w.clone());
    let mut probe = net.clone();
    let numeric = numeric_grad(
        |p| {
            probe.set_params(p).expect("same layout");
            weighted_sum(&probe, x, w)
        },
        &net.params(),
    );
    compare(&g.flatten(), &numeric)
}

/// Input gradient of `sum(net(x) ⊙ w)`, both from `backward` and `input_grad`.
pub fn mlp_input(net: &Mlp<f64>, x: &Array2<f64>, w: &Array2<f64>) -> GradReport {
    let tape = net.forward_tape(x.view()).expect("input width");
    let (_, dx) = net.backward(&tape, w.clone());
    let dx2 = net.input_grad(&tape, w.clone());
    let cols = x.ncols();
    let numeric = numeric_grad(
        |p| weighted_sum(net, &Array2::from_shape_vec((x.nrows(), cols), p.to_vec()).expect("shape"), w),
        &x.iter().copied().collect::<Vec<_>>(),
    );
    let mut r = compare(&dx.iter().copied().collect::<Vec<_>>(), &numeric);
    r.merge(&compare(&dx2.iter().copied().collect::<Vec<_>>(), &numeric));
    r
}

/// Actor parameter gradient of the reparameterised policy loss at fixed noise.
pub fn sac_actor(sac: &Sac<f64>, obs: &Array2<f64>, eps: &Array2<f64>) -> GradReport {
    let (_, g, _) = sac.actor_pass(obs, eps.clone());
    let mut probe = sac.clone();
    let numeric = numeric_grad(
        |p| {
            probe.actor.set_params(p).expect("same layout");
            probe.actor_pass(obs, eps.clone()).0
        },
        &sac.actor.params(),
    );
    compare(&g.flatten(), &numeric)
}

/// Parameter gradient of the critic regression loss `mean((Q(s, a) - y)²)`.
pub fn sac_critic(sac: &Sac<f64>, obs: &Array2<f64>, act: &Array2<f64>, y: &[f64]) -> GradReport {
    let x = concatenate![Axis(1), obs.view(), act.view()];
    let n = x.nrows() as f64;
    let loss = |net: &Mlp<f64>| -> f64 {
        let q = net.forward(x.view()).expect("critic width");
        q.column(0).iter().zip(y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / n
    };
    let tape = sac.q1.forward_tape(x.view()).expect("critic width");
    let g_out = Array2::from_shape_fn((x.nrows(), 1), |(r, _)| 2.0 * (tape.output()[[r, 0]] - y[r]) / n);
    let (g, _) = sac.q1.backward(&tape, g_out);
    let mut probe = sac.q1.clone();
    let numeric = numeric_grad(
        |p| {
            probe.set_params(p).expect("same layout");
            loss(&probe)
        },
        &sac.q1.params(),
    );
    compare(&g.flatten(), &numeric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_grad_of_a_cubic() {
        let g = numeric_grad(|x| x[0].powi(3) + 2.0 * x[1], &[2.0, -1.0]);
        assert!(agrees(12.0, g[0]) && agrees(2.0, g[1]));
    }

    #[test]
    fn compare_flags_wrong_coordinates() {
        let r = compare(&[1.0, 0.0, 5.0], &[1.0, 1e-12, 5.1]);
        assert_eq!(r.failures, 1);
        assert!(!r.passed());
        assert!((r.worst_rel - 0.1 / 5.1).abs() < 1e-12);
    }
}
