//! Per-feature affine map of the raw observation onto [-1, 1] using the
//! ranges implied by the configuration.

use crate::config::Scenario;
use crate::types::NodeKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ObsNormalizer {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(scn: &Scenario) -> Self {
        let c = &scn.cfg;
        let side = c.network.area_side;
        let t = &c.task;
        let kmin = t.priority_levels.iter().copied().min().unwrap_or(0) as f64;
        let kmax = t.priority_levels.iter().copied().max().unwrap_or(0) as f64;
        let mut lo = Vec::with_capacity(scn.num_observation());
        let mut hi = Vec::with_capacity(scn.num_observation());
        let mut push = |a: f64, b: f64| {
            lo.push(a);
            hi.push(b);
        };
        for _ in 0..c.network.num_vehicles {
            push(0.0, side);
            push(0.0, side);
            push(c.vehicle.speed_min, c.vehicle.speed_max);
            push(t.size_min, t.size_max);
            push(t.size_min * t.cycles_per_bit, t.size_max * t.cycles_per_bit);
            push(t.deadline_min, t.deadline_max);
            push(kmin, kmax);
        }
        let kinds = std::iter::repeat_n(NodeKind::Rsu, c.network.num_rsus)
            .chain(std::iter::repeat_n(NodeKind::Luav, c.network.num_luavs))
            .chain(std::iter::once(NodeKind::Bs));
        for kind in kinds {
            let (cpu, z) = match kind {
                NodeKind::Rsu => (c.nodes.rsu_cpu, 0.0),
                NodeKind::Luav => (c.nodes.luav_cpu, c.uav.luav_altitude),
                _ => (c.nodes.bs_cpu, 0.0),
            };
            push(0.0, cpu);
            push(0.0, side);
            push(0.0, side);
            // Fixed altitudes map to the centre of the range.
            push(z - 1.0, z + 1.0);
        }
        for _ in 0..c.network.num_luavs {
            push(0.0, std::f64::consts::TAU);
            push(0.0, c.uav.luav_vmax);
        }
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    /// Degenerate ranges map to 0; values outside the range are clipped.
    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.lo.len());
        obs.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
