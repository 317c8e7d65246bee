//! Discrete-event Monte Carlo simulation of unslotted CSMA/CA with the
//! same channel physics as the analytic engine.

mod engine;

use crate::error::{Error, Result};
use crate::metrics::PowerProfile;
use crate::scenario::Scenario;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub horizon_s: f64,
    pub replications: usize,
    pub master_seed: u64,
    /// Ticks (PHY symbols) per backoff unit.
    pub symbols_per_unit: u32,
    /// Packets a node may hold, the one in service included.
    pub queue_capacity: usize,
    /// Capacity used by relays; `None` means `queue_capacity`.
    pub relay_queue_capacity: Option<usize>,
    /// Whether ACKs are subject to the SINR rule.
    pub ack_loss: bool,
    /// Record a per-replication event trace.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon_s: 200.0,
            replications: 20,
            master_seed: 1,
            symbols_per_unit: 20,
            queue_capacity: 1,
            relay_queue_capacity: None,
            ack_loss: true,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::Validation(format!("sim: horizon_s = {} must be > 0", self.horizon_s)));
        }
        if self.replications == 0 || self.symbols_per_unit == 0 || self.queue_capacity == 0 {
            return Err(Error::Validation(
                "sim: replications, symbols_per_unit and queue_capacity must be >= 1".into(),
            ));
        }
        if self.relay_queue_capacity == Some(0) {
            return Err(Error::Validation("sim: relay_queue_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Radio states whose residence times make up the energy account.
pub const RADIO_STATES: [&str; 5] = ["sleep", "idle", "sense", "tx", "rx"];

/// Counters of one link in one replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinkCounts {
    pub src: usize,
    pub dst: usize,
    /// Packets generated at `src`.
    pub generated: u64,
    /// Packets received for forwarding.
    pub forwarded_in: u64,
    pub success: u64,
    pub discard_cf: u64,
    pub discard_cr: u64,
    pub queue_dropped: u64,
    /// Part of `queue_dropped` that was generated locally.
    pub own_dropped: u64,
    pub in_flight: u64,
    pub cca: u64,
    pub busy_cca: u64,
    /// Transmissions whose outcome (ACK or timeout) was observed.
    pub attempts: u64,
    pub attempts_failed: u64,
    pub delay_sum_s: f64,
    pub delay_count: u64,
    /// Packets from `src` that reached the sink, duplicates removed.
    pub delivered_to_sink: u64,
}

impl LinkCounts {
    pub fn conserved(&self) -> bool {
        self.generated + self.forwarded_in
            == self.success + self.discard_cf + self.discard_cr + self.queue_dropped + self.in_flight
    }

    /// Delivered over resolved packets; queue drops are excluded.
    pub fn reliability(&self) -> Option<f64> {
        ratio(self.success, self.success + self.discard_cf + self.discard_cr)
    }

    pub fn mean_delay_s(&self) -> Option<f64> {
        (self.delay_count > 0).then(|| self.delay_sum_s / self.delay_count as f64)
    }

    pub fn busy_prob(&self) -> Option<f64> {
        ratio(self.busy_cca, self.cca)
    }

    pub fn loss_prob(&self) -> Option<f64> {
        ratio(self.attempts_failed, self.attempts)
    }

    /// Sink deliveries over locally generated packets admitted to the queue.
    pub fn end_to_end(&self) -> Option<f64> {
        ratio(self.delivered_to_sink, self.generated - self.own_dropped)
    }
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub time_symbols: u64,
    pub node: usize,
    pub event: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub replication: usize,
    pub horizon_ticks: u64,
    pub tick_seconds: f64,
    /// In link order.
    pub links: Vec<LinkCounts>,
    /// Ticks per radio state, per node, ordered as `RADIO_STATES`.
    pub residence: Vec<[u64; 5]>,
    pub trace: Vec<TraceRecord>,
}

impl ReplicationStats {
    /// Average power per node, mW.
    pub fn power_mw(&self, profile: &PowerProfile) -> Result<Vec<f64>> {
        self.residence
            .iter()
            .map(|r| measure_energy(r, self.horizon_ticks, profile))
            .collect()
    }
}

/// Time-weighted average power from radio-state residence ticks.
pub fn measure_energy(residence: &[u64; 5], horizon_ticks: u64, profile: &PowerProfile) -> Result<f64> {
    let total: u64 = residence.iter().sum();
    if total != horizon_ticks || total == 0 {
        return Err(Error::Internal(format!(
            "radio residence covers {total} ticks of a {horizon_ticks}-tick horizon"
        )));
    }
    let p = [profile.p_sleep, profile.p_idle, profile.p_sense, profile.p_tx, profile.p_rx];
    let e: f64 = residence.iter().zip(p).map(|(&t, p)| t as f64 * p).sum();
    Ok(e / total as f64)
}

/// Mean and normal-approximation 95% half-width across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub ci95_half: Option<f64>,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ci95_half = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        });
        Some(Self { mean, ci95_half, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSummary {
    pub src: usize,
    pub dst: usize,
    pub reliability: Option<Estimate>,
    pub delay_s: Option<Estimate>,
    pub power_mw: Option<Estimate>,
    pub busy_prob: Option<Estimate>,
    pub loss_prob: Option<Estimate>,
    pub end_to_end: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub replications: Vec<ReplicationStats>,
    pub links: Vec<LinkSummary>,
    pub mean_reliability: Option<Estimate>,
    pub mean_delay_s: Option<Estimate>,
    pub mean_power_mw: Option<Estimate>,
}

/// One replication with its own reproducible random streams.
pub fn run_replication(scenario: &Scenario, cfg: &SimConfig, replication: usize) -> Result<ReplicationStats> {
    engine::Engine::new(scenario, cfg, replication)?.run()
}

/// Runs `cfg.replications` replications in parallel and aggregates them.
/// Results depend only on the seed, never on thread scheduling.
pub fn run_experiment(scenario: &Scenario, cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    let reps = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(scenario, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    summarize(scenario, reps)
}

fn summarize(scenario: &Scenario, reps: Vec<ReplicationStats>) -> Result<SimStats> {
    let powers = reps
        .iter()
        .map(|r| r.power_mw(&scenario.power))
        .collect::<Result<Vec<_>>>()?;
    let nlinks = reps.first().map_or(0, |r| r.links.len());
    let collect = |f: &dyn Fn(usize, usize) -> Option<f64>, l: usize| -> Option<Estimate> {
        let xs: Vec<f64> = (0..reps.len()).filter_map(|r| f(r, l)).collect();
        Estimate::from_samples(&xs)
    };
    let links = (0..nlinks)
        .map(|l| {
            let c = &reps[0].links[l];
            LinkSummary {
                src: c.src,
                dst: c.dst,
                reliability: collect(&|r, l| reps[r].links[l].reliability(), l),
                delay_s: collect(&|r, l| reps[r].links[l].mean_delay_s(), l),
                power_mw: collect(&|r, l| Some(powers[r][reps[r].links[l].src]), l),
                busy_prob: collect(&|r, l| reps[r].links[l].busy_prob(), l),
                loss_prob: collect(&|r, l| reps[r].links[l].loss_prob(), l),
                end_to_end: collect(&|r, l| reps[r].links[l].end_to_end(), l),
            }
        })
        .collect();
    // aggregate = per-replication mean over links, then across replications
    let agg = |f: &dyn Fn(&LinkCounts, usize) -> Option<f64>| -> Option<Estimate> {
        let xs: Vec<f64> = reps
            .iter()
            .enumerate()
            .filter_map(|(r, rep)| {
                let v: Option<Vec<f64>> = rep.links.iter().map(|c| f(c, r)).collect();
                v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        Estimate::from_samples(&xs)
    };
    Ok(SimStats {
        mean_reliability: agg(&|c, _| c.reliability()),
        mean_delay_s: agg(&|c, _| c.mean_delay_s()),
        mean_power_mw: agg(&|c, r| Some(powers[r][c.src])),
        links,
        replications: reps,
    })
}
