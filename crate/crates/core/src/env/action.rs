//! Mapping of the policy's squashed output onto offloading splits and LUAV
//! commands.

use std::f64::consts::PI;

use crate::config::Scenario;
use crate::types::{LuavControl, OffloadDecision};

/// Shift added to every logit before normalising.
pub const LAMBDA_EPS: f64 = 1e-6;

/// `λ_k = (raw_k + 1 + ε) / Σ_j (raw_j + 1 + ε)`; shares below `min_share`
/// are then dropped and the rest renormalised.
pub fn lambda_from_logits(raw: &[f64], min_share: f64) -> [f64; 5] {
    let mut lambda = [0.0; 5];
    for (l, r) in lambda.iter_mut().zip(raw) {
        *l = r.clamp(-1.0, 1.0) + 1.0 + LAMBDA_EPS;
    }
    normalise(&mut lambda);
    if min_share > 0.0 {
        for l in lambda.iter_mut() {
            if *l < min_share {
                *l = 0.0;
            }
        }
        normalise(&mut lambda);
    }
    lambda
}

fn normalise(lambda: &mut [f64; 5]) {
    let sum: f64 = lambda.iter().sum();
    for l in lambda.iter_mut() {
        *l /= sum;
    }
}

/// Raw action layout: `5·I` vehicle logits, then `(heading, speed)` per LUAV.
pub fn map_action(raw: &[f64], scn: &Scenario) -> (Vec<OffloadDecision>, Vec<LuavControl>) {
    assert_eq!(raw.len(), scn.num_action(), "action dimension");
    let nv = scn.num_vehicles();
    let min_share = scn.cfg.scheduler.min_offload_fraction;
    let decisions = (0..nv)
        .map(|i| OffloadDecision::unresolved(i, lambda_from_logits(&raw[5 * i..5 * i + 5], min_share)))
        .collect();
    let vmax = scn.cfg.uav.luav_vmax;
    let controls = (0..scn.num_luavs())
        .map(|l| {
            let h = raw[5 * nv + 2 * l].clamp(-1.0, 1.0);
            let s = raw[5 * nv + 2 * l + 1].clamp(-1.0, 1.0);
            LuavControl {
                luav_id: l,
                heading: (PI * (h + 1.0)).rem_euclid(2.0 * PI),
                speed: vmax * (s + 1.0) / 2.0,
            }
        })
        .collect();
    (decisions, controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    #[test]
    fn equal_logits_give_uniform_split() {
        for x in [-0.7, 0.0, 0.4, 1.0] {
            let l = lambda_from_logits(&[x; 5], 0.01);
            for v in l {
                assert!((v - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn speed_and_heading_endpoints() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.network.num_vehicles = 1;
        cfg.network.num_luavs = 2;
        let scn = cfg.validate().unwrap();
        let raw = [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, -1.0, 0.0, 1.0];
        let (_, c) = map_action(&raw, &scn);
        assert_eq!(c[0].speed, 0.0);
        assert_eq!(c[0].heading, 0.0);
        assert_eq!(c[1].speed, scn.cfg.uav.luav_vmax);
        assert!((c[1].heading - PI).abs() < 1e-12);
    }

    #[test]
    fn small_shares_dropped() {
        let l = lambda_from_logits(&[1.0, -1.0, -1.0, -1.0, -1.0], 0.01);
        assert_eq!(l, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let l = lambda_from_logits(&[1.0, -1.0, 1.0, -1.0, -1.0], 0.01);
        assert!((l[0] - 0.5).abs() < 1e-15 && (l[2] - 0.5).abs() < 1e-15);
        let raw = lambda_from_logits(&[1.0, -1.0, -1.0, -1.0, -1.0], 0.0);
        assert!(raw[1] > 0.0 && raw[1] < 1e-6);
    }
}
