use super::{cca_probability, subset_weights, LinkState, MacParams, QueueProbs, TimingParams, ALPHA_MAX};
use crate::channel::{
    detection_probability, mean_rx_power, outage_probability, ChannelParams, FadingParams, Multipath, OutageTerms,
    PowerTerm,
};
use crate::error::{Error, Result};
use crate::topology::{Link, Topology};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const STALL_ITERATIONS: usize = 50;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub init_alpha: f64,
    pub init_gamma: f64,
    pub enumeration_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            damping: 0.5,
            max_iter: 10_000,
            init_alpha: 0.0,
            init_gamma: 0.0,
            enumeration_cap: super::DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) || self.max_iter == 0 {
            return Err(Error::Validation(
                "solver: need tol > 0, damping in (0, 1] and max_iter >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.init_alpha) || !(0.0..=1.0).contains(&self.init_gamma) {
            return Err(Error::Validation("solver: initial alpha/gamma out of range".into()));
        }
        Ok(())
    }
}

/// Channel probabilities of one link for every subset of its contenders,
/// indexed by bitmask over `contenders`. Entry 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTables {
    pub link: Link,
    /// Indices of the other links, in bit order.
    pub contenders: Vec<usize>,
    /// Outage on the useful link from fading and noise alone.
    pub p_fad: f64,
    /// Detection at the transmitter of the power radiated by the subset.
    pub p_det: Vec<f64>,
    /// Outage at the receiver with the subset interfering.
    pub p_out: Vec<f64>,
}

/// Everything the fixed point needs: per-subset channel tables plus the
/// MAC and timing constants. The tables are computed once per scenario.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    pub tables: Vec<LinkTables>,
    pub mac: MacParams,
    pub timing: TimingParams,
    pub cap: usize,
}

/// Raw contention sums for one link before clamping.
#[derive(Debug, Clone, Copy)]
struct Contention {
    alpha_pkt: f64,
    alpha_ack: f64,
    gamma: f64,
}

impl AnalyticModel {
    pub fn new(
        topology: &Topology,
        channel: &ChannelParams,
        fading: &FadingParams,
        ptx_dbm: f64,
        mac: MacParams,
        timing: TimingParams,
        cap: usize,
    ) -> Result<Self> {
        topology.validate()?;
        fading.validate()?;
        if fading.sigma.len() != topology.node_count() {
            return Err(Error::Consistency(format!(
                "{} shadowing spreads for {} nodes",
                fading.sigma.len(),
                topology.node_count()
            )));
        }
        let links = topology.links();
        if links.len() - 1 > cap {
            return Err(Error::Capacity {
                contenders: links.len() - 1,
                cap,
            });
        }
        let tables = (0..links.len())
            .into_par_iter()
            .map(|l| link_tables(l, &links, topology, channel, fading, ptx_dbm))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tables,
            mac,
            timing,
            cap,
        })
    }

    /// Builds a model from precomputed tables, e.g. synthetic probabilities.
    pub fn from_tables(tables: Vec<LinkTables>, mac: MacParams, timing: TimingParams, cap: usize) -> Result<Self> {
        for t in &tables {
            if t.contenders.len() > cap {
                return Err(Error::Capacity {
                    contenders: t.contenders.len(),
                    cap,
                });
            }
            let size = 1usize << t.contenders.len();
            if t.p_det.len() != size || t.p_out.len() != size || t.contenders.iter().any(|&c| c >= tables.len()) {
                return Err(Error::Consistency(format!("malformed tables for link {:?}", t.link)));
            }
        }
        Ok(Self { tables, mac, timing, cap })
    }

    pub fn links(&self) -> Vec<Link> {
        self.tables.iter().map(|t| t.link).collect()
    }

    fn contention(&self, l: usize, tau: &[f64], alpha: &[f64], gamma: &[f64]) -> Contention {
        let t = &self.tables[l];
        let activity: Vec<f64> = t.contenders.iter().map(|&c| tau[c] * (1.0 - alpha[c])).collect();
        let w = subset_weights(&activity);
        let (mut h1, mut h_det, mut h_ack, mut h_out, mut h_hidden) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (mask, &wt) in w.iter().enumerate().skip(1) {
            if wt == 0.0 {
                continue;
            }
            let det = t.p_det[mask];
            let out = t.p_out[mask];
            let gamma_bar = {
                let (mut s, mut k) = (0.0, 0);
                for (bit, &c) in t.contenders.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        s += gamma[c];
                        k += 1;
                    }
                }
                s / k as f64
            };
            h1 += wt;
            h_det += wt * det;
            h_ack += wt * (1.0 - gamma_bar) * det;
            h_out += wt * out;
            h_hidden += wt * (1.0 - det) * out;
        }
        let l_pkt = self.timing.l;
        Contention {
            alpha_pkt: l_pkt * h_det,
            alpha_ack: self.timing.l_ack * h_ack,
            gamma: (1.0 - h1) * t.p_fad + h_out + (2.0 * l_pkt - 1.0) * h_hidden,
        }
    }

    /// `(α_pkt, α_ack)` of link `l` given all current states.
    pub fn busy_channel(&self, l: usize, states: &[LinkState]) -> (f64, f64) {
        let (tau, alpha, gamma) = unzip_states(states);
        let c = self.contention(l, &tau, &alpha, &gamma);
        (c.alpha_pkt, c.alpha_ack)
    }

    /// `γ` of link `l` given all current states, clamped to `[0, 1]`.
    pub fn packet_loss(&self, l: usize, states: &[LinkState]) -> f64 {
        let (tau, alpha, gamma) = unzip_states(states);
        self.contention(l, &tau, &alpha, &gamma).gamma.clamp(0.0, 1.0)
    }
}

fn unzip_states(states: &[LinkState]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        states.iter().map(|s| s.tau).collect(),
        states.iter().map(|s| s.alpha).collect(),
        states.iter().map(|s| s.gamma).collect(),
    )
}

fn link_tables(
    l: usize,
    links: &[Link],
    topology: &Topology,
    channel: &ChannelParams,
    fading: &FadingParams,
    ptx_dbm: f64,
) -> Result<LinkTables> {
    let link = links[l];
    let (i, j) = (link.tx, link.rx);
    let contenders: Vec<usize> = (0..links.len()).filter(|&c| c != l).collect();
    let multipath = !matches!(fading.kappa, Multipath::Disabled);
    let term = |from: usize, to: usize| -> Result<PowerTerm> {
        let p = mean_rx_power(ptx_dbm, topology.distance(from, to), channel)?;
        Ok(PowerTerm::new(p, fading.sigma[from], multipath))
    };
    let noise = channel.noise_mw();
    let useful = term(i, j)?;
    let p_fad = outage_probability(
        &OutageTerms {
            useful,
            interferers: &[],
            noise_mw: noise,
            corr: None,
        },
        channel.b_linear(),
        fading,
    )?;

    let masks: Vec<usize> = (1..1usize << contenders.len()).collect();
    let entries = masks
        .par_iter()
        .map(|&mask| -> Result<(f64, f64)> {
            let senders: Vec<usize> = contenders
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask >> bit & 1 == 1)
                .map(|(_, &c)| links[c].tx)
                .collect();
            let at_tx = senders.iter().map(|&s| term(s, i)).collect::<Result<Vec<_>>>()?;
            let det_corr = fading.rho.as_ref().map(|r| r.select(&senders));
            let p_det = detection_probability(&at_tx, det_corr.as_ref(), channel.a_mw(), fading)?;
            // a receiver that is itself transmitting cannot receive
            let p_out = if senders.contains(&j) {
                1.0
            } else {
                let at_rx = senders.iter().map(|&s| term(s, j)).collect::<Result<Vec<_>>>()?;
                let base: Vec<usize> = std::iter::once(i).chain(senders.iter().copied()).collect();
                let out_corr = fading.rho.as_ref().map(|r| r.select(&base));
                outage_probability(
                    &OutageTerms {
                        useful,
                        interferers: &at_rx,
                        noise_mw: noise,
                        corr: out_corr.as_ref(),
                    },
                    channel.b_linear(),
                    fading,
                )?
            };
            Ok((p_det, p_out))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut p_det = vec![0.0; 1 << contenders.len()];
    let mut p_out = vec![0.0; 1 << contenders.len()];
    for (&mask, (d, o)) in masks.iter().zip(entries) {
        p_det[mask] = d;
        p_out[mask] = o;
    }
    Ok(LinkTables {
        link,
        contenders,
        p_fad,
        p_det,
        p_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub states: Vec<LinkState>,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Damped Jacobi iteration `x <- x + d (F(x) - x)` on `(τ, α, γ)` of all
/// links. `q` and `queue` are per link, in the model's link order.
///
/// `d` starts at `cfg.damping` and is halved whenever the residual has not
/// improved for a while, which settles the oscillations seen near
/// saturation.
pub fn solve_fixed_point(
    model: &AnalyticModel,
    q: &[f64],
    queue: &[QueueProbs],
    cfg: &SolverConfig,
) -> Result<FixedPoint> {
    cfg.validate()?;
    let n = model.tables.len();
    if q.len() != n || queue.len() != n {
        return Err(Error::Consistency(format!(
            "{} links but {} arrival and {} queue probabilities",
            n,
            q.len(),
            queue.len()
        )));
    }
    if let Some(bad) = q.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::Domain(format!("arrival probability {bad} not in (0, 1]")));
    }

    let mut alpha = vec![cfg.init_alpha; n];
    let mut gamma = vec![cfg.init_gamma; n];
    let mut tau = (0..n)
        .map(|l| cca_probability(alpha[l], gamma[l], q[l], &queue[l], &model.mac, &model.timing).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = Vec::new();
    let mut clamp_iterations = 0usize;
    let mut d = cfg.damping;
    let (mut best, mut best_at) = (f64::INFINITY, 0usize);
    for it in 1..=cfg.max_iter {
        let next = (0..n)
            .into_par_iter()
            .map(|l| -> Result<(LinkState, bool, bool)> {
                let c = model.contention(l, &tau, &alpha, &gamma);
                let (t, b000) = cca_probability(alpha[l], gamma[l], q[l], &queue[l], &model.mac, &model.timing)?;
                let raw_alpha = c.alpha_pkt + c.alpha_ack;
                let state = LinkState {
                    tau: t,
                    alpha_pkt: c.alpha_pkt,
                    alpha_ack: c.alpha_ack,
                    alpha: raw_alpha.min(ALPHA_MAX),
                    gamma: c.gamma.clamp(0.0, 1.0),
                    b000,
                    q: q[l],
                    queue: queue[l],
                };
                Ok((state, raw_alpha > ALPHA_MAX, !(0.0..=1.0).contains(&c.gamma)))
            })
            .collect::<Result<Vec<_>>>()?;

        let residual = next
            .iter()
            .enumerate()
            .map(|(l, (s, _, _))| {
                (s.tau - tau[l])
                    .abs()
                    .max((s.alpha - alpha[l]).abs())
                    .max((s.gamma - gamma[l]).abs())
            })
            .fold(0.0, f64::max);
        trace.push(residual);
        if next.iter().any(|(_, a, g)| *a || *g) {
            clamp_iterations += 1;
        }
        if !residual.is_finite() {
            return Err(Error::Numeric {
                message: "fixed-point update produced a non-finite value".into(),
                diagnostics: trace.iter().map(|r| format!("{r:e}")).collect(),
            });
        }

        if residual < cfg.tol {
            let mut warnings = Vec::new();
            for (l, (s, a, g)) in next.iter().enumerate() {
                let link = model.tables[l].link;
                if *a {
                    warnings.push(format!(
                        "link {}->{}: busy-channel probability clamped to 1-1e-9 (raw {:.6})",
                        link.tx,
                        link.rx,
                        s.alpha_pkt + s.alpha_ack
                    ));
                }
                if *g {
                    warnings.push(format!("link {}->{}: packet-loss probability clamped to [0,1]", link.tx, link.rx));
                }
            }
            if clamp_iterations > 0 {
                warnings.push(format!("clamping was active in {clamp_iterations} of {it} iterations"));
            }
            if d < cfg.damping {
                warnings.push(format!("damping reduced to {d} to stop oscillation"));
            }
            return Ok(FixedPoint {
                states: next.into_iter().map(|(s, _, _)| s).collect(),
                iterations: it,
                residual,
                warnings,
            });
        }

        // an oscillating iterate stops improving; damp harder
        if residual < best {
            (best, best_at) = (residual, it);
        } else if it - best_at >= STALL_ITERATIONS && d > MIN_DAMPING {
            d = (d * 0.5).max(MIN_DAMPING);
            best_at = it;
        }
        for (l, (s, _, _)) in next.iter().enumerate() {
            tau[l] += d * (s.tau - tau[l]);
            alpha[l] += d * (s.alpha - alpha[l]);
            gamma[l] += d * (s.gamma - gamma[l]);
        }
    }
    Err(Error::Solver {
        iterations: cfg.max_iter,
        last_residual: trace.last().copied().unwrap_or(f64::NAN),
        residual_trace: trace,
    })
}
