use rand::Rng;

use crate::config::Scenario;
use crate::types::Task;

fn uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// One fresh task per vehicle: size and deadline uniform over their ranges,
/// cycles proportional to size, priority uniform over the configured levels.
pub fn generate_tasks<R: Rng + ?Sized>(rng: &mut R, scn: &Scenario) -> Vec<Task> {
    let t = &scn.cfg.task;
    (0..scn.num_vehicles())
        .map(|vehicle_id| {
            let data_size = uniform(t.size_min, t.size_max, rng);
            let deadline = uniform(t.deadline_min, t.deadline_max, rng);
            let priority = t.priority_levels[rng.random_range(0..t.priority_levels.len())];
            Task { vehicle_id, data_size, cycles: t.cycles_per_bit * data_size, deadline, priority }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranges_and_shape() {
        let scn = SimConfig::paper_defaults().validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let tasks = generate_tasks(&mut rng, &scn);
            assert_eq!(tasks.len(), scn.num_vehicles());
            for (i, t) in tasks.iter().enumerate() {
                assert_eq!(t.vehicle_id, i);
                assert!((100e6..=600e6).contains(&t.data_size));
                assert!((0.1..=1.0).contains(&t.deadline));
                assert_eq!(t.cycles, 100.0 * t.data_size);
                assert!([1, 2, 3].contains(&t.priority));
            }
        }
    }

    #[test]
    fn degenerate_size_range() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.task.size_min = 2e6;
        cfg.task.size_max = 2e6;
        let scn = cfg.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(generate_tasks(&mut rng, &scn).iter().all(|t| t.data_size == 2e6));
    }

    #[test]
    fn mean_size_monte_carlo() {
        let mut cfg = SimConfig::paper_defaults();
        cfg.network.num_vehicles = 1;
        let scn = cfg.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let (lo, hi) = (scn.cfg.task.size_min, scn.cfg.task.size_max);
        let mean = (0..n).map(|_| generate_tasks(&mut rng, &scn)[0].data_size).sum::<f64>() / n as f64;
        let sigma = (hi - lo) / 12f64.sqrt();
        assert!((mean - (lo + hi) / 2.0).abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
    }
}
