//! Reliability, mean delay of delivered packets, and average power draw
//! computed from solved link states.

use crate::error::{Error, Result};
use crate::macmodel::{backoff_units, geometric_sum, xi, LinkState, MacParams, TimingParams};
use serde::{Deserialize, Serialize};

/// Average radio power draw per state, mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerProfile {
    pub p_idle: f64,
    pub p_sense: f64,
    pub p_tx: f64,
    pub p_rx: f64,
    pub p_sleep: f64,
}

impl Default for PowerProfile {
    /// CC2420 at 3 V, 0 dBm output.
    fn default() -> Self {
        Self {
            p_idle: 0.712,
            p_sense: 35.28,
            p_tx: 31.32,
            p_rx: 35.28,
            p_sleep: 0.000_144,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        let all = [self.p_idle, self.p_sense, self.p_tx, self.p_rx, self.p_sleep];
        if all.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Validation("power profile entries must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `(p_cf, p_cr)`: discard probabilities from channel-access failure and
/// from exceeding the retry limit.
pub fn discard_probabilities(alpha: f64, gamma: f64, mac: &MacParams) -> (f64, f64) {
    let x = xi(alpha, gamma, mac);
    let p_cf = alpha.powi(mac.m as i32 + 1) * geometric_sum(x, mac.n);
    let p_cr = x.powi(mac.n as i32 + 1);
    (p_cf, p_cr)
}

pub fn reliability(alpha: f64, gamma: f64, mac: &MacParams) -> f64 {
    let (cf, cr) = discard_probabilities(alpha, gamma, mac);
    (1.0 - cf - cr).clamp(0.0, 1.0)
}

/// `Pr[C_h | C]`, `h = 0..=n`: the delivered packet needed `h` retransmissions.
pub fn retry_distribution(alpha: f64, gamma: f64, mac: &MacParams) -> Vec<f64> {
    let x = xi(alpha, gamma, mac);
    let s = geometric_sum(x, mac.n);
    (0..=mac.n).map(|h| x.powi(h as i32) / s).collect()
}

/// `Pr[D_r | D]`, `r = 0..=m`: channel access succeeded after `r` busy CCAs.
pub fn busy_distribution(alpha: f64, mac: &MacParams) -> Vec<f64> {
    let s = geometric_sum(alpha, mac.m);
    (0..=mac.m).map(|r| alpha.powi(r as i32) / s).collect()
}

/// Expected duration of one successful channel-access procedure, backoff
/// units: the sensing time plus, for `r` busy CCAs before the idle one,
/// `r` more sensing times and the mean backoff of stages `0..=r`.
pub fn expected_access_time(alpha: f64, mac: &MacParams, timing: &TimingParams) -> f64 {
    let mut acc = timing.t_sc;
    let mut backoff = 0.0;
    for (r, p) in busy_distribution(alpha, mac).into_iter().enumerate() {
        backoff += 0.5 * (mac.window(r as u32) - 1.0);
        acc += p * (r as f64 * timing.t_sc + backoff);
    }
    acc
}

/// Mean delay of delivered packets, seconds.
pub fn expected_delay(alpha: f64, gamma: f64, mac: &MacParams, timing: &TimingParams) -> Result<f64> {
    if !(alpha < 1.0) || !(gamma < 1.0) {
        return Err(Error::UndefinedDelay(format!(
            "no packet is ever delivered at alpha = {alpha}, gamma = {gamma}"
        )));
    }
    let access = expected_access_time(alpha, mac, timing);
    let units: f64 = retry_distribution(alpha, gamma, mac)
        .into_iter()
        .enumerate()
        .map(|(h, p)| {
            let h = h as f64;
            p * (timing.ls() + h * timing.lc() + (h + 1.0) * access)
        })
        .sum();
    Ok(units * timing.sb_seconds)
}

/// Average power of one node split by activity, mW.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub backoff: f64,
    pub sense: f64,
    pub transmit: f64,
    pub receive: f64,
    pub idle_queue: f64,
    pub relay: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.backoff + self.sense + self.transmit + self.receive + self.idle_queue + self.relay
    }
}

fn attempt_cost(s: &LinkState, profile: &PowerProfile, timing: &TimingParams) -> f64 {
    profile.p_tx * timing.l
        + profile.p_idle
        + (profile.p_rx * (1.0 - s.gamma) + profile.p_idle * s.gamma) * timing.l_ack
}

/// Power drawn by the transmitter of one link.
///
/// `relay` selects idle listening instead of sleep while the queue is
/// empty; `children` are the states of links whose receiver is this node.
pub fn energy_rate(
    state: &LinkState,
    relay: bool,
    children: &[LinkState],
    profile: &PowerProfile,
    mac: &MacParams,
    timing: &TimingParams,
) -> EnergyBreakdown {
    let s = state;
    let access_ratio = 1.0 / geometric_sum(s.alpha, mac.m);
    let relay_cost: f64 = children
        .iter()
        .map(|c| (1.0 - c.gamma) * (1.0 - c.alpha) * c.tau * attempt_cost(c, profile, timing))
        .sum();
    EnergyBreakdown {
        backoff: profile.p_idle * s.tau * access_ratio * backoff_units(s.alpha, mac),
        sense: profile.p_sense * s.tau,
        transmit: (1.0 - s.alpha) * s.tau * attempt_cost(s, profile, timing),
        receive: 0.0,
        idle_queue: if relay { profile.p_idle } else { profile.p_sleep } * s.b000,
        relay: relay_cost,
    }
}

/// Indicators of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub src: usize,
    pub dst: usize,
    pub reliability: f64,
    pub p_cf: f64,
    pub p_cr: f64,
    /// `None` when no packet can be delivered.
    pub delay_s: Option<f64>,
    pub energy: EnergyBreakdown,
    pub power_mw: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub links: Vec<LinkMetrics>,
    pub mean_reliability: f64,
    pub mean_delay_s: Option<f64>,
    pub mean_power_mw: f64,
    /// End-to-end reliability per source node, filled for multi-hop runs.
    pub end_to_end: Vec<(usize, f64)>,
}

impl MetricsReport {
    /// `links[l]` is `(tx, rx)` of state `l`; `relays[l]` whether its
    /// transmitter also forwards traffic.
    pub fn build(
        links: &[(usize, usize)],
        states: &[LinkState],
        relays: &[bool],
        profile: &PowerProfile,
        mac: &MacParams,
        timing: &TimingParams,
    ) -> Self {
        let per_link: Vec<LinkMetrics> = links
            .iter()
            .zip(states)
            .zip(relays)
            .map(|((&(src, dst), s), &relay)| {
                let children: Vec<LinkState> = links
                    .iter()
                    .zip(states)
                    .filter(|((_, rx), _)| *rx == src)
                    .map(|(_, c)| *c)
                    .collect();
                let (p_cf, p_cr) = discard_probabilities(s.alpha, s.gamma, mac);
                let energy = energy_rate(s, relay, &children, profile, mac, timing);
                LinkMetrics {
                    src,
                    dst,
                    reliability: reliability(s.alpha, s.gamma, mac),
                    p_cf,
                    p_cr,
                    delay_s: expected_delay(s.alpha, s.gamma, mac, timing).ok(),
                    power_mw: energy.total(),
                    energy,
                    alpha: s.alpha,
                    gamma: s.gamma,
                    tau: s.tau,
                }
            })
            .collect();
        let n = per_link.len().max(1) as f64;
        let delays: Option<Vec<f64>> = per_link.iter().map(|m| m.delay_s).collect();
        Self {
            mean_reliability: per_link.iter().map(|m| m.reliability).sum::<f64>() / n,
            mean_delay_s: delays.map(|d| d.iter().sum::<f64>() / n),
            mean_power_mw: per_link.iter().map(|m| m.power_mw).sum::<f64>() / n,
            links: per_link,
            end_to_end: Vec::new(),
        }
    }
}
