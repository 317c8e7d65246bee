//! Per-link CSMA/CA chain quantities, the contention functional `H`, and
//! the damped fixed point that couples all links through the channel.

mod network;

pub use network::{solve_fixed_point, AnalyticModel, FixedPoint, LinkTables, SolverConfig};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ceiling applied to the busy-channel probability.
pub const ALPHA_MAX: f64 = 1.0 - 1e-9;

/// Default cap on the number of contending links enumerated by `H`.
pub const DEFAULT_ENUMERATION_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    /// macMinBE
    pub m0: u32,
    /// macMaxBE
    pub mb: u32,
    /// macMaxCSMABackoffs
    pub m: u32,
    /// macMaxFrameRetries
    pub n: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            m0: 3,
            mb: 5,
            m: 4,
            n: 0,
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<()> {
        if self.m0 > self.mb || self.mb > 8 {
            return Err(Error::Validation(format!(
                "mac: need 0 <= m0 <= mb <= 8, got m0 = {}, mb = {}",
                self.m0, self.mb
            )));
        }
        if self.m > 5 {
            return Err(Error::Validation(format!("mac: m = {} not in [0, 5]", self.m)));
        }
        if self.n > 7 {
            return Err(Error::Validation(format!("mac: n = {} not in [0, 7]", self.n)));
        }
        Ok(())
    }

    /// Contention window of backoff stage `k`, `2^min(m0 + k, mb)`.
    pub fn window(&self, k: u32) -> f64 {
        f64::from(1u32 << (self.m0 + k).min(self.mb))
    }
}

/// Frame-level durations, all in backoff units except `sb_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingParams {
    pub sb_seconds: f64,
    pub l: f64,
    pub l_ack: f64,
    /// Wait between the end of a packet and the start of its ACK.
    pub t_ack: f64,
    /// ACK timeout after a packet whose ACK never arrives.
    pub t_m_ack: f64,
    pub ifs: f64,
    pub turnaround: f64,
    /// Duration of one CCA.
    pub t_sc: f64,
}

impl Default for TimingParams {
    /// 250 kb/s O-QPSK: 16 us symbols, 20-symbol backoff unit, 70-byte
    /// packets, 11-byte ACKs, 12-symbol turnaround, 8-symbol CCA,
    /// 54-symbol ACK wait and 40-symbol LIFS.
    fn default() -> Self {
        Self {
            sb_seconds: 320e-6,
            l: 7.0,
            l_ack: 1.1,
            t_ack: 0.6,
            t_m_ack: 2.7,
            ifs: 2.0,
            turnaround: 0.6,
            t_sc: 0.4,
        }
    }
}

impl TimingParams {
    /// Channel occupancy of a successful attempt.
    pub fn ls(&self) -> f64 {
        self.l + self.t_ack + self.l_ack + self.ifs
    }

    /// Channel occupancy of a failed attempt.
    pub fn lc(&self) -> f64 {
        self.l + self.t_m_ack
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sb_seconds", self.sb_seconds),
            ("l", self.l),
            ("l_ack", self.l_ack),
            ("t_ack", self.t_ack),
            ("t_m_ack", self.t_m_ack),
            ("ifs", self.ifs),
            ("turnaround", self.turnaround),
            ("t_sc", self.t_sc),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("timing: {name} = {v} must be finite and >= 0")));
            }
        }
        if self.sb_seconds <= 0.0 || self.l <= 0.0 {
            return Err(Error::Validation("timing: sb_seconds and l must be positive".into()));
        }
        Ok(())
    }
}

/// Probabilities that the queue is still non-empty after a success, an
/// access failure, or a retry-limit discard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueProbs {
    pub succ: f64,
    pub cf: f64,
    pub cr: f64,
}

impl QueueProbs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("succ", self.succ), ("cf", self.cf), ("cr", self.cr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("queue probability {name} = {v} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Unknowns of the coupled model for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub tau: f64,
    pub alpha_pkt: f64,
    pub alpha_ack: f64,
    /// `min(alpha_pkt + alpha_ack, ALPHA_MAX)`
    pub alpha: f64,
    pub gamma: f64,
    pub b000: f64,
    pub q: f64,
    pub queue: QueueProbs,
}

impl LinkState {
    pub fn xi(&self, mac: &MacParams) -> f64 {
        xi(self.alpha, self.gamma, mac)
    }
}

/// `1 - exp(-lambda * S_b)`.
pub fn arrival_probability(lambda_pkt_per_s: f64, sb_seconds: f64) -> f64 {
    -(-lambda_pkt_per_s * sb_seconds).exp_m1()
}

/// `Σ_{k=0}^{n} x^k`, finite at `x = 1`.
pub(crate) fn geometric_sum(x: f64, n: u32) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..=n {
        acc += p;
        p *= x;
    }
    acc
}

/// Probability that an attempt fails after channel access, `γ(1 - α^{m+1})`.
pub fn xi(alpha: f64, gamma: f64, mac: &MacParams) -> f64 {
    gamma * (1.0 - alpha.powi(mac.m as i32 + 1))
}

/// `½ Σ_{k=0}^{m} α^k (W_k + 1)`: expected backoff units (CCA included)
/// spent per channel-access procedure, weighted by the chance of reaching
/// each stage.
pub(crate) fn backoff_units(alpha: f64, mac: &MacParams) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for k in 0..=mac.m {
        acc += p * (mac.window(k) + 1.0);
        p *= alpha;
    }
    0.5 * acc
}

/// CCA probability `τ` and first-backoff-state probability `b000`.
///
/// All geometric ratios are evaluated as finite sums, so `α = ½` and
/// `ξ = 1` need no special casing and the two window-capping branches
/// collapse into one.
pub fn cca_probability(
    alpha: f64,
    gamma: f64,
    q: f64,
    queue: &QueueProbs,
    mac: &MacParams,
    timing: &TimingParams,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "cca_probability needs alpha in [0,1) and gamma in [0,1], got {alpha}, {gamma}"
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("arrival probability q = {q} not in (0, 1]")));
    }
    let access = 1.0 - alpha.powi(mac.m as i32 + 1);
    let x = gamma * access;
    let s_alpha = geometric_sum(alpha, mac.m);
    let s_xi = geometric_sum(x, mac.n);

    let denom = backoff_units(alpha, mac) * s_xi
        + (timing.ls() * (1.0 - gamma) + timing.lc() * gamma) * access * s_xi
        + (1.0 - queue.cf) / q * (1.0 - access) * s_xi
        + (1.0 - queue.cr) / q * x.powi(mac.n as i32 + 1)
        + (1.0 - queue.succ) / q * (1.0 - gamma) * access * s_xi;
    let b000 = 1.0 / denom;
    Ok((s_alpha * s_xi * b000, b000))
}

/// Probability of each transmitter subset `T` (bitmask over contenders)
/// being exactly the set that started transmitting, given per-contender
/// activity `τ_z (1 - α_z)`.
pub fn subset_weights(activity: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(1 << activity.len());
    w.push(1.0);
    for (z, &a) in activity.iter().enumerate() {
        let bit = 1usize << z;
        for mask in 0..bit {
            let base = w[mask];
            w.push(base * a);
            w[mask] = base * (1.0 - a);
        }
        debug_assert_eq!(w.len(), bit << 1);
    }
    w
}

/// `H(χ) = Σ_{T ≠ ∅} χ(T) Π_{z∈T} τ_z(1-α_z) Π_{h∉T} (1 - τ_h(1-α_h))`.
///
/// `contenders` holds `(τ, α)` of every other link; `chi` receives the
/// subset as a bitmask over that slice.
pub fn h_functional<F>(contenders: &[(f64, f64)], mut chi: F, cap: usize) -> Result<f64>
where
    F: FnMut(usize) -> f64,
{
    if contenders.len() > cap {
        return Err(Error::Capacity {
            contenders: contenders.len(),
            cap,
        });
    }
    let activity: Vec<f64> = contenders.iter().map(|&(t, a)| t * (1.0 - a)).collect();
    let w = subset_weights(&activity);
    Ok(w.iter().enumerate().skip(1).map(|(mask, wt)| wt * chi(mask)).sum())
}
