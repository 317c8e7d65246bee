use super::{LinkCounts, ReplicationStats, SimConfig, TraceRecord};
use crate::channel::{mean_rx_power, Multipath};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet, VecDeque};

const SLEEP: usize = 0;
const IDLE: usize = 1;
const SENSE: usize = 2;
const TX: usize = 3;
const RX: usize = 4;

/// MAC durations in ticks.
#[derive(Debug, Clone, Copy)]
struct Ticks {
    unit: u64,
    packet: u64,
    ack: u64,
    turnaround: u64,
    ack_wait: u64,
    ifs: u64,
    cca: u64,
}

fn whole_ticks(name: &str, units: f64, per_unit: u32) -> Result<u64> {
    let x = units * f64::from(per_unit);
    let r = x.round();
    if (x - r).abs() > 1e-6 || r < 0.0 {
        return Err(Error::Setup(format!(
            "timing.{name} = {units} backoff units is not a whole number of {per_unit}-per-unit ticks"
        )));
    }
    Ok(r as u64)
}

/// Same-tick ordering: transmissions end, then start, then CCAs sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    TxEnd { tx: u64 },
    TxStart { node: usize, epoch: u64 },
    AckStart { node: usize, to: usize, data: u64 },
    CcaEnd { node: usize, epoch: u64 },
    Arrival { node: usize },
    BackoffEnd { node: usize, epoch: u64 },
    AckTimeout { node: usize, epoch: u64 },
    Ready { node: usize, epoch: u64 },
}

impl Event {
    fn class(&self) -> u8 {
        match self {
            Event::TxEnd { .. } => 0,
            Event::TxStart { .. } | Event::AckStart { .. } => 1,
            Event::CcaEnd { .. } => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    id: u64,
    origin: usize,
    entered: u64,
}

#[derive(Debug)]
struct Node {
    link: Option<usize>,
    dest: Option<usize>,
    listening: bool,
    capacity: usize,
    queue: VecDeque<Packet>,
    current: Option<Packet>,
    busy: bool,
    nb: u32,
    be: u32,
    rt: u32,
    epoch: u64,
    awaiting: Option<u64>,
    base: usize,
    tx: u32,
    rx: u32,
    radio: usize,
    since: u64,
    residence: [u64; 5],
    arrival_clock_s: f64,
}

#[derive(Debug)]
struct Transmission {
    id: u64,
    sender: usize,
    dest: usize,
    /// For ACKs, the data transmission acknowledged.
    acks: Option<u64>,
    packet: Option<Packet>,
    /// Received power at every node, mW.
    power: Vec<f64>,
    failed: bool,
}

pub(super) struct Engine<'a> {
    sc: &'a Scenario,
    cfg: &'a SimConfig,
    replication: usize,
    ticks: Ticks,
    tick_s: f64,
    horizon: u64,
    now: u64,
    seq: u64,
    next_id: u64,
    heap: BinaryHeap<Reverse<(u64, u8, u64, Event)>>,
    nodes: Vec<Node>,
    active: Vec<Transmission>,
    mean_power: Vec<Vec<f64>>,
    nakagami: Option<Gamma<f64>>,
    a_mw: f64,
    b_lin: f64,
    noise_mw: f64,
    counts: Vec<LinkCounts>,
    delivered: HashSet<u64>,
    rng_arrival: ChaCha8Rng,
    rng_backoff: ChaCha8Rng,
    rng_fading: ChaCha8Rng,
    trace: Vec<TraceRecord>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(sc: &'a Scenario, cfg: &'a SimConfig, replication: usize) -> Result<Self> {
        cfg.validate()?;
        if sc.fading.rho.as_ref().is_some_and(|r| !r.is_independent()) {
            return Err(Error::Setup("correlated shadowing is not supported by the simulator".into()));
        }
        let t = &sc.timing;
        let per = cfg.symbols_per_unit;
        let ticks = Ticks {
            unit: u64::from(per),
            packet: whole_ticks("l", t.l, per)?,
            ack: whole_ticks("l_ack", t.l_ack, per)?,
            turnaround: whole_ticks("turnaround", t.turnaround, per)?,
            ack_wait: whole_ticks("t_m_ack", t.t_m_ack, per)?,
            ifs: whole_ticks("ifs", t.ifs, per)?,
            cca: whole_ticks("t_sc", t.t_sc, per)?,
        };
        if whole_ticks("t_ack", t.t_ack, per)? != ticks.turnaround {
            return Err(Error::Setup("the simulator sends ACKs one turnaround after the packet: t_ack must equal turnaround".into()));
        }
        if ticks.packet == 0 || ticks.ack_wait < ticks.turnaround + ticks.ack {
            return Err(Error::Setup("need a non-empty packet and t_m_ack >= turnaround + l_ack".into()));
        }
        let tick_s = t.sb_seconds / f64::from(per);
        let horizon = (cfg.horizon_s / tick_s).round() as u64;

        let topo = &sc.topology;
        let n = topo.node_count();
        let links = topo.links();
        let mut mean_power = vec![vec![0.0; n]; n];
        for (from, row) in mean_power.iter_mut().enumerate() {
            for (to, p) in row.iter_mut().enumerate() {
                if from != to {
                    *p = mean_rx_power(sc.ptx_dbm, topo.distance(from, to), &sc.channel)?;
                }
            }
        }
        let nakagami = match sc.fading.kappa {
            Multipath::Disabled => None,
            Multipath::Nakagami(k) => {
                Some(Gamma::new(k, 1.0 / k).map_err(|e| Error::Setup(format!("Nakagami parameter: {e}")))?)
            }
        };
        let mut link_of = vec![None; n];
        for (l, link) in links.iter().enumerate() {
            link_of[link.tx] = Some(l);
        }
        let nodes = (0..n)
            .map(|i| {
                let listening = i == topo.sink || topo.is_relay(i);
                Node {
                    link: link_of[i],
                    dest: topo.next_hop[i],
                    listening,
                    capacity: if topo.is_relay(i) {
                        cfg.relay_queue_capacity.unwrap_or(cfg.queue_capacity)
                    } else {
                        cfg.queue_capacity
                    },
                    queue: VecDeque::new(),
                    current: None,
                    busy: false,
                    nb: 0,
                    be: 0,
                    rt: 0,
                    epoch: 0,
                    awaiting: None,
                    base: if listening { IDLE } else { SLEEP },
                    tx: 0,
                    rx: 0,
                    radio: if listening { IDLE } else { SLEEP },
                    since: 0,
                    residence: [0; 5],
                    arrival_clock_s: 0.0,
                }
            })
            .collect();
        let counts = links
            .iter()
            .map(|l| LinkCounts {
                src: l.tx,
                dst: l.rx,
                ..LinkCounts::default()
            })
            .collect();

        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.master_seed);
            r.set_stream(replication as u64 * 3 + k);
            r
        };
        Ok(Self {
            sc,
            cfg,
            replication,
            ticks,
            tick_s,
            horizon,
            now: 0,
            seq: 0,
            next_id: 0,
            heap: BinaryHeap::new(),
            nodes,
            active: Vec::new(),
            mean_power,
            nakagami,
            a_mw: sc.channel.a_mw(),
            b_lin: sc.channel.b_linear(),
            noise_mw: sc.channel.noise_mw(),
            counts,
            delivered: HashSet::new(),
            rng_arrival: stream(0),
            rng_backoff: stream(1),
            rng_fading: stream(2),
            trace: Vec::new(),
        })
    }

    pub(super) fn run(mut self) -> Result<ReplicationStats> {
        for node in 0..self.nodes.len() {
            self.schedule_arrival(node);
        }
        while let Some(Reverse((t, _, _, ev))) = self.heap.pop() {
            if t >= self.horizon {
                break;
            }
            self.now = t;
            self.handle(ev);
        }
        self.now = self.horizon;
        for i in 0..self.nodes.len() {
            let n = &mut self.nodes[i];
            n.residence[n.radio] += self.horizon - n.since;
            n.since = self.horizon;
            if let Some(l) = n.link {
                self.counts[l].in_flight = n.queue.len() as u64 + u64::from(n.current.is_some());
            }
        }
        for c in &self.counts {
            if !c.conserved() {
                return Err(Error::Internal(format!(
                    "packet conservation violated on link {}->{} in replication {}: {c:?}",
                    c.src, c.dst, self.replication
                )));
            }
        }
        let residence: Vec<[u64; 5]> = self.nodes.iter().map(|n| n.residence).collect();
        if let Some(r) = residence.iter().find(|r| r.iter().sum::<u64>() != self.horizon) {
            return Err(Error::Internal(format!("radio accounting gap: {r:?} over {} ticks", self.horizon)));
        }
        Ok(ReplicationStats {
            replication: self.replication,
            horizon_ticks: self.horizon,
            tick_seconds: self.tick_s,
            links: self.counts,
            residence,
            trace: self.trace,
        })
    }

    fn push(&mut self, at: u64, ev: Event) {
        self.seq += 1;
        self.heap.push(Reverse((at, ev.class(), self.seq, ev)));
    }

    fn log(&mut self, node: usize, event: &'static str, detail: impl FnOnce() -> String) {
        if self.cfg.trace {
            self.trace.push(TraceRecord {
                time_symbols: self.now,
                node,
                event,
                detail: detail(),
            });
        }
    }

    fn set_radio(&mut self, node: usize) {
        let now = self.now;
        let n = &mut self.nodes[node];
        let state = if n.tx > 0 {
            TX
        } else if n.rx > 0 {
            RX
        } else {
            n.base
        };
        if state != n.radio {
            n.residence[n.radio] += now - n.since;
            n.radio = state;
            n.since = now;
        }
    }

    fn set_base(&mut self, node: usize, base: usize) {
        self.nodes[node].base = base;
        self.set_radio(node);
    }

    fn schedule_arrival(&mut self, node: usize) {
        let lambda = self.sc.lambda[node];
        if node == self.sc.topology.sink || !(lambda > 0.0) {
            return;
        }
        let gap: f64 = Exp::new(lambda).expect("positive rate").sample(&mut self.rng_arrival);
        let n = &mut self.nodes[node];
        n.arrival_clock_s += gap;
        let at = (n.arrival_clock_s / self.tick_s).ceil();
        if at < self.horizon as f64 {
            self.push(at as u64, Event::Arrival { node });
        }
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Arrival { node } => {
                self.next_id += 1;
                let pkt = Packet {
                    id: self.next_id,
                    origin: node,
                    entered: self.now,
                };
                if let Some(l) = self.nodes[node].link {
                    self.counts[l].generated += 1;
                }
                self.log(node, "arrival", || format!("packet {}", pkt.id));
                self.admit(node, pkt, true);
                self.schedule_arrival(node);
            }
            Event::BackoffEnd { node, epoch } if self.nodes[node].epoch == epoch => {
                self.set_base(node, SENSE);
                let l = self.nodes[node].link.expect("transmitting node has a link");
                self.counts[l].cca += 1;
                self.push(self.now + self.ticks.cca, Event::CcaEnd { node, epoch });
            }
            Event::CcaEnd { node, epoch } if self.nodes[node].epoch == epoch => self.cca_end(node, epoch),
            Event::TxStart { node, epoch } if self.nodes[node].epoch == epoch => {
                if self.nodes[node].tx > 0 {
                    // still sending an ACK of its own: treat as a busy channel
                    self.channel_busy(node);
                    return;
                }
                self.set_base(node, IDLE);
                let dest = self.nodes[node].dest.expect("transmitting node has a next hop");
                let pkt = self.nodes[node].current;
                let id = self.start_tx(node, dest, None, pkt, self.ticks.packet);
                self.log(node, "tx_start", || format!("tx {id} to {dest}"));
            }
            Event::TxEnd { tx } => self.tx_end(tx),
            Event::AckStart { node, to, data } => {
                if self.nodes[node].tx > 0 {
                    self.log(node, "ack_skipped", || format!("busy transmitting, data tx {data}"));
                    return;
                }
                let id = self.start_tx(node, to, Some(data), None, self.ticks.ack);
                self.log(node, "ack_start", || format!("tx {id} acks {data}"));
            }
            Event::AckTimeout { node, epoch } if self.nodes[node].epoch == epoch => {
                let l = self.nodes[node].link.expect("link");
                self.counts[l].attempts += 1;
                self.counts[l].attempts_failed += 1;
                let n = &mut self.nodes[node];
                n.awaiting = None;
                n.rt += 1;
                let give_up = n.rt > self.sc.mac.n;
                self.log(node, "timeout", String::new);
                if give_up {
                    self.counts[l].discard_cr += 1;
                    self.log(node, "discard_cr", String::new);
                    self.finish(node);
                } else {
                    self.begin_csma(node);
                }
            }
            Event::Ready { node, epoch } if self.nodes[node].epoch == epoch => self.next_service(node),
            _ => {} // superseded by a later MAC decision
        }
    }

    fn admit(&mut self, node: usize, mut pkt: Packet, own: bool) {
        let l = match self.nodes[node].link {
            Some(l) => l,
            None => return,
        };
        if !own {
            self.counts[l].forwarded_in += 1;
        }
        let n = &self.nodes[node];
        if n.queue.len() + usize::from(n.current.is_some()) >= n.capacity {
            self.counts[l].queue_dropped += 1;
            if own {
                self.counts[l].own_dropped += 1;
            }
            self.log(node, "drop", || format!("packet {}", pkt.id));
            return;
        }
        pkt.entered = self.now;
        self.nodes[node].queue.push_back(pkt);
        if !self.nodes[node].busy {
            self.start_service(node);
        }
    }

    fn start_service(&mut self, node: usize) {
        let now = self.now;
        let n = &mut self.nodes[node];
        let mut pkt = n.queue.pop_front().expect("non-empty queue");
        pkt.entered = now;
        n.current = Some(pkt);
        n.busy = true;
        n.rt = 0;
        self.begin_csma(node);
    }

    fn begin_csma(&mut self, node: usize) {
        let n = &mut self.nodes[node];
        n.nb = 0;
        n.be = self.sc.mac.m0;
        self.backoff(node);
    }

    fn backoff(&mut self, node: usize) {
        self.set_base(node, IDLE);
        let be = self.nodes[node].be;
        let k = self.rng_backoff.random_range(0..1u64 << be);
        let epoch = self.nodes[node].epoch;
        self.log(node, "backoff", || format!("{k} units, BE {be}"));
        self.push(self.now + k * self.ticks.unit, Event::BackoffEnd { node, epoch });
    }

    fn cca_end(&mut self, node: usize, epoch: u64) {
        let sensed: f64 = self.active.iter().filter(|t| t.sender != node).map(|t| t.power[node]).sum();
        if sensed >= self.a_mw || self.nodes[node].tx > 0 {
            self.log(node, "cca_busy", || format!("{sensed:e} mW"));
            self.channel_busy(node);
        } else {
            // radio stays in receive mode through the RX-to-TX turnaround
            self.log(node, "cca_idle", || format!("{sensed:e} mW"));
            self.push(self.now + self.ticks.turnaround, Event::TxStart { node, epoch });
        }
    }

    fn channel_busy(&mut self, node: usize) {
        let l = self.nodes[node].link.expect("link");
        self.counts[l].busy_cca += 1;
        let mac = self.sc.mac;
        let n = &mut self.nodes[node];
        n.nb += 1;
        n.be = (n.be + 1).min(mac.mb);
        if n.nb > mac.m {
            self.counts[l].discard_cf += 1;
            self.log(node, "discard_cf", String::new);
            self.finish(node);
        } else {
            self.backoff(node);
        }
    }

    fn draw_powers(&mut self, sender: usize) -> Vec<f64> {
        let sigma = self.sc.fading.sigma[sender];
        (0..self.nodes.len())
            .map(|n| {
                let z: f64 = StandardNormal.sample(&mut self.rng_fading);
                let f = self.nakagami.map_or(1.0, |g| g.sample(&mut self.rng_fading));
                if n == sender {
                    0.0
                } else {
                    self.mean_power[sender][n] * (sigma * z).exp() * f
                }
            })
            .collect()
    }

    fn start_tx(&mut self, sender: usize, dest: usize, acks: Option<u64>, packet: Option<Packet>, dur: u64) -> u64 {
        self.next_id += 1;
        let id = self.next_id;
        let power = self.draw_powers(sender);
        let mut new = Transmission {
            id,
            sender,
            dest,
            acks,
            packet,
            power,
            failed: false,
        };
        // half duplex: a node cannot receive while transmitting
        for t in &mut self.active {
            if t.dest == sender {
                t.failed = true;
            }
        }
        if self.active.iter().any(|t| t.sender == dest) {
            new.failed = true;
        }
        self.active.push(new);
        // interference only grows at a start, so checking here covers the whole packet
        let total_at = |node: usize, active: &[Transmission]| -> f64 { active.iter().map(|t| t.power[node]).sum() };
        for k in 0..self.active.len() {
            let t = &self.active[k];
            if t.failed || (t.acks.is_some() && !self.cfg.ack_loss) {
                continue;
            }
            let useful = t.power[t.dest];
            let interference = total_at(t.dest, &self.active) - useful;
            if useful < self.b_lin * (interference + self.noise_mw) {
                self.active[k].failed = true;
            }
        }
        self.nodes[sender].tx += 1;
        self.set_radio(sender);
        self.nodes[dest].rx += 1;
        self.set_radio(dest);
        self.push(self.now + dur, Event::TxEnd { tx: id });
        id
    }

    fn tx_end(&mut self, id: u64) {
        let pos = self.active.iter().position(|t| t.id == id).expect("active transmission");
        let t = self.active.swap_remove(pos);
        self.nodes[t.sender].tx -= 1;
        self.set_radio(t.sender);
        self.nodes[t.dest].rx -= 1;
        self.set_radio(t.dest);
        match t.acks {
            None => {
                let node = t.sender;
                self.nodes[node].awaiting = Some(id);
                let epoch = self.nodes[node].epoch;
                self.push(self.now + self.ticks.ack_wait, Event::AckTimeout { node, epoch });
                self.log(node, "tx_end", || format!("tx {id} {}", if t.failed { "lost" } else { "received" }));
                if !t.failed {
                    if let Some(pkt) = t.packet {
                        self.deliver(t.dest, pkt);
                    }
                    self.push(
                        self.now + self.ticks.turnaround,
                        Event::AckStart {
                            node: t.dest,
                            to: t.sender,
                            data: id,
                        },
                    );
                }
            }
            Some(data) => {
                let node = t.dest;
                if !t.failed && self.nodes[node].awaiting == Some(data) {
                    self.success(node);
                }
            }
        }
    }

    fn deliver(&mut self, at: usize, pkt: Packet) {
        if at == self.sc.topology.sink {
            if self.delivered.insert(pkt.id) {
                if let Some(l) = self.nodes[pkt.origin].link {
                    self.counts[l].delivered_to_sink += 1;
                }
            }
        } else {
            self.log(at, "forward", || format!("packet {} from {}", pkt.id, pkt.origin));
            self.admit(at, pkt, false);
        }
    }

    fn success(&mut self, node: usize) {
        let l = self.nodes[node].link.expect("link");
        let done = self.now + self.ticks.ifs;
        let n = &mut self.nodes[node];
        n.awaiting = None;
        n.epoch += 1;
        let pkt = n.current.take().expect("packet in service");
        let epoch = n.epoch;
        let c = &mut self.counts[l];
        c.success += 1;
        c.attempts += 1;
        c.delay_sum_s += (done - pkt.entered) as f64 * self.tick_s;
        c.delay_count += 1;
        self.log(node, "success", || format!("packet {}", pkt.id));
        self.push(done, Event::Ready { node, epoch });
    }

    fn finish(&mut self, node: usize) {
        let n = &mut self.nodes[node];
        n.current = None;
        n.epoch += 1;
        self.next_service(node);
    }

    fn next_service(&mut self, node: usize) {
        self.nodes[node].busy = false;
        if self.nodes[node].queue.is_empty() {
            let base = if self.nodes[node].listening { IDLE } else { SLEEP };
            self.set_base(node, base);
        } else {
            self.start_service(node);
        }
    }
}
