//! Forwarded-traffic coupling for multi-hop routing.

use crate::error::{Error, Result};
use crate::macmodel::{arrival_probability, solve_fixed_point, AnalyticModel, FixedPoint, QueueProbs, SolverConfig};
use crate::metrics::{reliability, MetricsReport, PowerProfile};
use crate::topology::Topology;
use serde::Serialize;

/// Square 0/1 next-hop matrix over all nodes, sink included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    n: usize,
    next: Vec<Option<usize>>,
}

impl RoutingMatrix {
    pub fn from_topology(t: &Topology) -> Result<Self> {
        t.validate()?;
        Ok(Self {
            n: t.node_count(),
            next: t.next_hop.clone(),
        })
    }

    /// From explicit rows; rejects rows with several ones and cyclic routes.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut next = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Topology(format!("routing row {i} has {} entries, expected {n}", row.len())));
            }
            let ones: Vec<usize> = row.iter().enumerate().filter(|(_, v)| **v != 0).map(|(j, _)| j).collect();
            if ones.len() > 1 || row.iter().any(|v| *v > 1) || ones.contains(&i) {
                return Err(Error::Topology(format!("routing row {i} must hold at most one 1 off the diagonal")));
            }
            next.push(ones.first().copied());
        }
        let m = Self { n, next };
        m.check_acyclic()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        u8::from(self.next[i] == Some(j))
    }

    pub fn next_hop(&self, i: usize) -> Option<usize> {
        self.next[i]
    }

    fn check_acyclic(&self) -> Result<()> {
        for i in 0..self.n {
            let mut cur = i;
            for _ in 0..=self.n {
                match self.next[cur] {
                    Some(j) => cur = j,
                    None => break,
                }
            }
            if self.next[cur].is_some() {
                return Err(Error::Topology(format!("routing from node {i} contains a cycle")));
            }
        }
        Ok(())
    }
}

/// `T_{ij} = M_{ij} R_{i->j}` as a dense row-major matrix. `reliability[i]`
/// is the reliability of node `i`'s outgoing link.
pub fn traffic_matrix(m: &RoutingMatrix, reliability: &[Option<f64>]) -> Result<Vec<f64>> {
    let n = m.len();
    if reliability.len() != n {
        return Err(Error::Consistency(format!("{} reliabilities for {n} nodes", reliability.len())));
    }
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        if let Some(j) = m.next_hop(i) {
            let r = reliability[i]
                .ok_or_else(|| Error::Consistency(format!("no reliability for routed link {i}->{j}")))?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Consistency(format!("reliability {r} of link {i}->{j} not in [0,1]")));
            }
            t[i * n + j] = r;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficVector {
    /// Aggregate packet rate per node, pkt/s.
    pub rates: Vec<f64>,
    /// Per-backoff-unit arrival probability per node.
    pub q: Vec<f64>,
}

/// `Λ = Σ_k (Tᵀ)^k λ`. The series terminates because acyclic routing makes
/// `Tᵀ` nilpotent; a term surviving `n` products means a cycle.
pub fn traffic_vector(lambda: &[f64], t: &[f64], sb_seconds: f64) -> Result<TrafficVector> {
    let n = lambda.len();
    if t.len() != n * n {
        return Err(Error::Consistency(format!("traffic matrix has {} entries for {n} nodes", t.len())));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Domain("generation rates must be finite and >= 0".into()));
    }
    let mut total = lambda.to_vec();
    let mut term = lambda.to_vec();
    for _ in 0..n {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if term[i] == 0.0 {
                continue;
            }
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += t[i * n + j] * term[i];
            }
        }
        term = next;
        if term.iter().all(|v| *v == 0.0) {
            let q = total.iter().map(|&r| arrival_probability(r, sb_seconds)).collect();
            return Ok(TrafficVector { rates: total, q });
        }
        for (a, b) in total.iter_mut().zip(&term) {
            *a += b;
        }
    }
    Err(Error::Topology("traffic does not drain to the sink: routing contains a cycle".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkSolution {
    pub fixed_point: FixedPoint,
    pub traffic: TrafficVector,
    pub report: MetricsReport,
    pub outer_iterations: usize,
}

pub const OUTER_TOL: f64 = 1e-8;
pub const OUTER_MAX_ITER: usize = 200;

/// Alternates traffic and per-link fixed points until the traffic vector
/// settles. `lambda` and `queue` are per node; the sink entries are ignored.
pub fn solve_network(
    topology: &Topology,
    model: &AnalyticModel,
    lambda: &[f64],
    queue: &[QueueProbs],
    profile: &PowerProfile,
    cfg: &SolverConfig,
) -> Result<NetworkSolution> {
    let routing = RoutingMatrix::from_topology(topology)?;
    let n = topology.node_count();
    let links = topology.links();
    if lambda.len() != n || queue.len() != n {
        return Err(Error::Consistency(format!(
            "{} rates and {} queue entries for {n} nodes",
            lambda.len(),
            queue.len()
        )));
    }
    if model.links() != links {
        return Err(Error::Consistency("analytic model was built for a different topology".into()));
    }
    let sb = model.timing.sb_seconds;
    let mut lam = lambda.to_vec();
    lam[topology.sink] = 0.0;
    let link_queue: Vec<QueueProbs> = links.iter().map(|l| queue[l.tx]).collect();

    // start from lossless forwarding
    let mut rel: Vec<Option<f64>> = (0..n).map(|i| topology.next_hop[i].map(|_| 1.0)).collect();
    let mut traffic = traffic_vector(&lam, &traffic_matrix(&routing, &rel)?, sb)?;
    let mut trace = Vec::new();
    for it in 1..=OUTER_MAX_ITER {
        let q: Vec<f64> = links.iter().map(|l| traffic.q[l.tx]).collect();
        let fp = solve_fixed_point(model, &q, &link_queue, cfg)?;
        for (l, s) in links.iter().zip(&fp.states) {
            rel[l.tx] = Some(reliability(s.alpha, s.gamma, &model.mac));
        }
        let next = traffic_vector(&lam, &traffic_matrix(&routing, &rel)?, sb)?;
        let change = next
            .rates
            .iter()
            .zip(&traffic.rates)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(change);
        traffic = next;
        if change < OUTER_TOL {
            let pairs: Vec<(usize, usize)> = links.iter().map(|l| (l.tx, l.rx)).collect();
            let relays: Vec<bool> = links.iter().map(|l| topology.is_relay(l.tx)).collect();
            let mut report = MetricsReport::build(&pairs, &fp.states, &relays, profile, &model.mac, &model.timing);
            report.end_to_end = end_to_end(topology, &rel);
            return Ok(NetworkSolution {
                fixed_point: fp,
                traffic,
                report,
                outer_iterations: it,
            });
        }
    }
    Err(Error::Solver {
        iterations: OUTER_MAX_ITER,
        last_residual: trace.last().copied().unwrap_or(f64::NAN),
        residual_trace: trace,
    })
}

/// Product of per-link reliabilities from each source to the sink.
pub fn end_to_end(topology: &Topology, reliability: &[Option<f64>]) -> Vec<(usize, f64)> {
    (0..topology.node_count())
        .filter(|&i| i != topology.sink)
        .map(|i| {
            let r = topology
                .path_to_sink(i)
                .iter()
                .map(|&k| reliability[k].unwrap_or(0.0))
                .product();
            (i, r)
        })
        .collect()
}
