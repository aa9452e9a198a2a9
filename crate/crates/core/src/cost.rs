//! Delay and energy of each execution mode, rotary-wing propulsion power and
//! the per-slot aggregate metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Scenario;
use crate::scalar::Scalar;
use crate::types::{Mode, SlotMetrics, Task};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("CPU frequency {0} is not positive")]
    InvalidFrequency(f64),
    #[error("link rate is zero for a non-zero share")]
    UnreachableLink,
    #[error("no CPU allocated for a non-zero share")]
    NoAllocation,
    #[error("speed {0} is negative")]
    InvalidSpeed(f64),
    #[error("share {0} outside [0, 1]")]
    InvalidShare(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeCost<T = f64> {
    pub delay: T,
    pub energy: T,
}

impl<T: Scalar> ModeCost<T> {
    pub fn zero() -> Self {
        Self { delay: T::zero(), energy: T::zero() }
    }
}

/// Rotary-wing constants. Units: W, W, m/s, -, kg/m³, -, m², m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorParams<T = f64> {
    pub profile_power: T,
    pub induced_power: T,
    pub tip_speed: T,
    pub drag_ratio: T,
    pub air_density: T,
    pub solidity: T,
    pub disk_area: T,
    pub induced_velocity: T,
}

impl<T: Scalar> RotorParams<T> {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("profile_power", self.profile_power),
            ("induced_power", self.induced_power),
            ("tip_speed", self.tip_speed),
            ("drag_ratio", self.drag_ratio),
            ("air_density", self.air_density),
            ("solidity", self.solidity),
            ("disk_area", self.disk_area),
            ("induced_velocity", self.induced_velocity),
        ];
        for (name, v) in fields {
            if !(v > T::zero() && v.is_finite()) {
                return Err(format!("{name} must be finite and positive"));
            }
        }
        Ok(())
    }
}

fn check_share<T: Scalar>(lambda: T) -> Result<(), CostError> {
    if lambda >= T::zero() && lambda <= T::one() {
        Ok(())
    } else {
        Err(CostError::InvalidShare(lambda.as_f64()))
    }
}

/// Local execution: `T = λC/f`, `E = η f³ T`.
pub fn local_cost<T: Scalar>(
    lambda: T,
    task: &Task,
    cpu: T,
    kappa: T,
) -> Result<ModeCost<T>, CostError> {
    check_share(lambda)?;
    if !(cpu > T::zero()) {
        return Err(CostError::InvalidFrequency(cpu.as_f64()));
    }
    let delay = lambda * T::of(task.cycles) / cpu;
    Ok(ModeCost { delay, energy: kappa * cpu * cpu * cpu * delay })
}

/// Direct offload to an RSU or LUAV: upload then execute on `f_alloc`.
pub fn edge_cost<T: Scalar>(
    lambda: T,
    task: &Task,
    rate: T,
    f_alloc: T,
    kappa: T,
    tx_power: T,
) -> Result<ModeCost<T>, CostError> {
    check_share(lambda)?;
    if lambda == T::zero() {
        return Ok(ModeCost::zero());
    }
    if !(rate > T::zero()) {
        return Err(CostError::UnreachableLink);
    }
    if !(f_alloc > T::zero()) {
        return Err(CostError::NoAllocation);
    }
    let bits = lambda * T::of(task.data_size);
    let cycles = lambda * T::of(task.cycles);
    let tx = bits / rate;
    Ok(ModeCost {
        delay: tx + cycles / f_alloc,
        energy: tx_power * tx + kappa * f_alloc * f_alloc * cycles,
    })
}

/// Two-hop offload through the HUAV to a remote RSU or the BS.
#[allow(clippy::too_many_arguments)]
pub fn relay_cost<T: Scalar>(
    lambda: T,
    task: &Task,
    rate_uplink: T,
    rate_downlink: T,
    f_alloc: T,
    kappa: T,
    tx_power: T,
    huav_tx_power: T,
) -> Result<ModeCost<T>, CostError> {
    check_share(lambda)?;
    if lambda == T::zero() {
        return Ok(ModeCost::zero());
    }
    if !(rate_uplink > T::zero() && rate_downlink > T::zero()) {
        return Err(CostError::UnreachableLink);
    }
    if !(f_alloc > T::zero()) {
        return Err(CostError::NoAllocation);
    }
    let bits = lambda * T::of(task.data_size);
    let cycles = lambda * T::of(task.cycles);
    let tx1 = bits / rate_uplink;
    let tx2 = bits / rate_downlink;
    Ok(ModeCost {
        delay: tx1 + tx2 + cycles / f_alloc,
        energy: tx_power * tx1 + huav_tx_power * tx2 + kappa * f_alloc * f_alloc * cycles,
    })
}

/// Rotary-wing propulsion power at horizontal speed `v`.
pub fn propulsion_power<T: Scalar>(v: T, rp: &RotorParams<T>) -> Result<T, CostError> {
    if !(v >= T::zero()) {
        return Err(CostError::InvalidSpeed(v.as_f64()));
    }
    let half = T::of(0.5);
    let v2 = v * v;
    let profile = rp.profile_power * (T::one() + T::of(3.0) * v2 / (rp.tip_speed * rp.tip_speed));
    let drag = half * rp.drag_ratio * rp.air_density * rp.solidity * rp.disk_area * v2 * v;
    // sqrt(1 + x²) - x with x = v²/(2ν0²), written to avoid cancellation
    let x = v2 / (T::of(2.0) * rp.induced_velocity * rp.induced_velocity);
    let induced = rp.induced_power * (T::one() / ((T::one() + x * x).sqrt() + x)).sqrt();
    Ok(profile + drag + induced)
}

pub fn luav_fly_energy<T: Scalar>(v: T, rp: &RotorParams<T>, slot_len: T) -> Result<T, CostError> {
    Ok(propulsion_power(v, rp)? * slot_len)
}

pub fn huav_hover_energy<T: Scalar>(rp: &RotorParams<T>, slot_len: T) -> T {
    (rp.profile_power + rp.induced_power) * slot_len
}

/// Parallel branches finish when the slowest one does.
pub fn task_total_delay<T: Scalar>(costs: &[ModeCost<T>; 5]) -> T {
    costs.iter().fold(T::zero(), |m, c| m.max(c.delay))
}

/// What [`slot_metrics`] needs to know about one vehicle's task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub total_delay: f64,
    pub deadline: f64,
    pub mode_energy: [f64; 5],
    pub lambda: [f64; 5],
}

impl TaskOutcome {
    pub fn from_costs(task: &Task, lambda: [f64; 5], costs: &[ModeCost<f64>; 5]) -> Self {
        let mut mode_energy = [0.0; 5];
        for m in Mode::ALL {
            mode_energy[m.index()] = costs[m.index()].energy;
        }
        Self { total_delay: task_total_delay(costs), deadline: task.deadline, mode_energy, lambda }
    }

    pub fn completed(&self) -> bool {
        self.total_delay <= self.deadline
    }
}

/// Completion rate, energies and the weighted reward of one slot.
///
/// `luav_speeds` lists the commanded speed of every LUAV that flies this slot;
/// the HUAV hover energy is always charged.
pub fn slot_metrics(per_task: &[TaskOutcome], luav_speeds: &[f64], scn: &Scenario) -> SlotMetrics {
    let uav = &scn.cfg.uav;
    let mut fly = 0.0;
    for &v in luav_speeds {
        fly += luav_fly_energy(v.max(0.0), &uav.luav_rotor, scn.slot_len).expect("validated rotor");
    }
    let hover = huav_hover_energy(&uav.huav_rotor, scn.slot_len);
    slot_metrics_with_uav_energy(per_task, fly + hover, scn)
}

pub fn slot_metrics_with_uav_energy(
    per_task: &[TaskOutcome],
    uav_energy: f64,
    scn: &Scenario,
) -> SlotMetrics {
    let n = per_task.len();
    let completed = per_task.iter().filter(|t| t.completed()).count();
    let completion_rate = if n == 0 { 1.0 } else { completed as f64 / n as f64 };
    let total_delay: f64 = per_task.iter().map(|t| t.total_delay).sum();
    let compute_energy: f64 = per_task.iter().flat_map(|t| t.mode_energy.iter()).sum();
    let mut offload_mass = [0.0; 5];
    for t in per_task {
        for (m, l) in offload_mass.iter_mut().zip(t.lambda.iter()) {
            *m += l;
        }
    }
    let system_energy = compute_energy + uav_energy;
    let w = &scn.cfg.reward;
    let reward = w.w_completion * completion_rate
        - w.w_delay * scn.delay_norm * total_delay
        - w.w_energy * scn.energy_norm * system_energy;
    SlotMetrics {
        completion_rate,
        total_delay,
        compute_energy,
        uav_energy,
        system_energy,
        reward,
        offload_mass,
        node_energy: Vec::new(),
        violations: Default::default(),
    }
}
