//! Path loss and Shannon link rates for the ground (NLoS) and air (LoS) links.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::Scenario;
use crate::scalar::Scalar;
use crate::types::{distance, NodeId, NodeKind, NodeState, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("degenerate geometry: link distance {0} is not positive")]
    DegenerateGeometry(f64),
    #[error("noise power {0} W is not positive")]
    InvalidNoise(f64),
    #[error("invalid shadowing factor {0}")]
    InvalidShadowing(f64),
    #[error("relay target {0} is the vehicle's direct RSU")]
    InvalidRelayTarget(NodeId),
    #[error("relay target {0} is neither an RSU nor the BS")]
    NotRelayable(NodeId),
}

/// Gain and rate of one link in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T = f64> {
    pub gain: T,
    pub bandwidth: T,
    pub tx_power: T,
    pub noise: T,
    pub rate: T,
}

impl<T: Scalar> LinkBudget<T> {
    pub fn new(gain: T, bandwidth: T, tx_power: T, noise: T) -> Result<Self, ChannelError> {
        let rate = link_rate(bandwidth, tx_power, gain, noise)?;
        Ok(Self { gain, bandwidth, tx_power, noise, rate })
    }
}

/// Ground-to-ground NLoS gain `β0·ξ / d^α1`.
pub fn g2g_gain<T: Scalar>(d: T, beta0: T, alpha_nlos: T, xi: T) -> Result<T, ChannelError> {
    if !(d > T::zero()) {
        return Err(ChannelError::DegenerateGeometry(d.as_f64()));
    }
    if !(xi > T::zero()) {
        return Err(ChannelError::InvalidShadowing(xi.as_f64()));
    }
    Ok(beta0 * xi / d.powf(alpha_nlos))
}

/// LoS gain `β0 / d^α2`.
pub fn los_gain<T: Scalar>(d: T, beta0: T, alpha_los: T) -> Result<T, ChannelError> {
    if !(d > T::zero()) {
        return Err(ChannelError::DegenerateGeometry(d.as_f64()));
    }
    Ok(beta0 / d.powf(alpha_los))
}

/// Shannon rate `B·log2(1 + P·h/Pn)` in bits/s.
pub fn link_rate<T: Scalar>(bandwidth: T, tx_power: T, gain: T, noise: T) -> Result<T, ChannelError> {
    if !(noise > T::zero()) {
        return Err(ChannelError::InvalidNoise(noise.as_f64()));
    }
    let snr = tx_power * gain / noise;
    Ok(bandwidth * snr.ln_1p() / T::LN_2())
}

/// Log-normal shadowing factor: `10^(g/10)` with `g ~ N(mu_db, sigma_db²)`.
pub fn sample_shadowing<R: Rng + ?Sized>(mu_db: f64, sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 10f64.powf(mu_db / 10.0);
    }
    let g = Normal::new(mu_db, sigma_db).expect("sigma validated").sample(rng);
    10f64.powf(g / 10.0)
}

pub fn clamped_distance(a: &Vec3, b: &Vec3, min_distance: f64) -> f64 {
    distance(a, b).max(min_distance)
}

/// Rates of the two relay hops vehicle→HUAV and HUAV→target.
///
/// `bw_uplink` and `bw_downlink` are the bandwidth shares of this flow. The
/// target must be the BS or an RSU other than the vehicle's direct RSU.
pub fn relay_pair_rates(
    scn: &Scenario,
    vehicle: &Vec3,
    huav: &Vec3,
    target: &NodeState,
    direct_rsu: Option<NodeId>,
    bw_uplink: f64,
    bw_downlink: f64,
) -> Result<(f64, f64), ChannelError> {
    match target.kind {
        NodeKind::Rsu if Some(target.id) == direct_rsu => {
            return Err(ChannelError::InvalidRelayTarget(target.id))
        }
        NodeKind::Rsu | NodeKind::Bs => {}
        _ => return Err(ChannelError::NotRelayable(target.id)),
    }
    let c = &scn.cfg.channel;
    let d1 = clamped_distance(vehicle, huav, c.min_distance);
    let d2 = clamped_distance(huav, &target.position, c.min_distance);
    let h1 = los_gain(d1, scn.beta0, c.alpha_los)?;
    let h2 = los_gain(d2, scn.beta0, c.alpha_los)?;
    let r1 = link_rate(bw_uplink, scn.cfg.vehicle.tx_power, h1, scn.noise_power)?;
    let r2 = link_rate(bw_downlink, scn.cfg.uav.huav_tx_power, h2, scn.noise_power)?;
    Ok((r1, r2))
}
