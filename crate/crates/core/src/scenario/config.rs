//! Scenario files (TOML, or JSON for generated inputs), dotted-path
//! overrides and resolution into a validated [`Scenario`].

use super::Scenario;
use crate::channel::{ChannelParams, CorrMatrix, FadingParams, Multipath, NEPER_PER_DB};
use crate::error::{Error, Result};
use crate::macmodel::{MacParams, QueueProbs, SolverConfig, TimingParams};
use crate::metrics::PowerProfile;
use crate::sim::SimConfig;
use crate::topology::{Position, Topology};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

/// Top-level layout of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_id")]
    pub id: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub mac: MacParams,
    #[serde(default)]
    pub timing: TimingParams,
    #[serde(default)]
    pub power: PowerProfile,
    pub traffic: TrafficSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimConfig,
    /// Parsed separately by the sweep runner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Value>,
}

fn default_id() -> String {
    "scenario".into()
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Star {
        nodes: usize,
        #[serde(default = "one")]
        radius_m: f64,
    },
    Line {
        nodes: usize,
        #[serde(default = "one")]
        hop_m: f64,
    },
    Tree {
        nodes: usize,
        #[serde(default = "two")]
        fanout: usize,
        #[serde(default = "one")]
        hop_m: f64,
    },
    /// Coordinates in meters and `[src, dst]` next-hop pairs.
    Explicit {
        positions: Vec<[f64; 2]>,
        routes: Vec<[usize; 2]>,
        #[serde(default)]
        sink: usize,
    },
}

/// One value for every node, or one per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    All(T),
    Each(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Value(f64),
    /// `"disabled"`
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub c0_db: f64,
    pub k: f64,
    pub n0_dbm: f64,
    pub a_dbm: f64,
    pub b_db: f64,
    pub ptx_dbm: f64,
    /// Shadowing spread in nepers.
    pub sigma: Option<PerNode<f64>>,
    /// Shadowing spread in dB; converted with ln(10)/10.
    pub sigma_db: Option<PerNode<f64>>,
    pub kappa: KappaSpec,
    pub rho: Option<Vec<Vec<f64>>>,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            c0_db: -55.0,
            k: 2.0,
            n0_dbm: -100.0,
            a_dbm: -76.0,
            b_db: 6.0,
            ptx_dbm: 0.0,
            sigma: None,
            sigma_db: None,
            kappa: KappaSpec::Word("disabled".into()),
            rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    /// pkt/s; a list may cover every node or every node but the sink.
    pub lambda: PerNode<f64>,
    #[serde(default)]
    pub queue: Option<PerNode<QueueProbs>>,
}

/// Parses TOML, or JSON when the text starts with `{`.
pub fn parse_document(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            message: e.to_string(),
            line: Some(e.line()),
        })
    } else {
        let t: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        serde_json::to_value(t).map_err(|e| Error::Parse {
            message: e.to_string(),
            line: None,
        })
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    Error::Parse {
        message: e.message().to_string(),
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
    }
}

/// Parses the value of a `--set key=value` as a TOML literal, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `path` (dot separated; numeric parts index arrays), creating
/// missing tables on the way.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Validation(format!("bad parameter path '{path}'")));
    }
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Validation(format!("'{path}': '{part}' does not index a list")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Validation(format!("'{path}': index {idx} out of range ({len})")))?
            }
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| if last { Value::Null } else { Value::Object(Default::default()) }),
            _ => return Err(Error::Validation(format!("'{path}': '{part}' is inside a scalar"))),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    unreachable!("path has at least one part")
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("override '{o}' is not key=value")))?;
        set_path(doc, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}

/// Reads, overrides, resolves and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>, overrides: &[String]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_scenario(&text, overrides)
}

pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut doc = parse_document(text)?;
    apply_overrides(&mut doc, overrides)?;
    match resolve_scenario(&doc) {
        // point schema errors at a line when the file itself is at fault
        Err(Error::Parse { line: None, message }) if !text.trim_start().starts_with('{') => {
            match toml::from_str::<ScenarioFile>(text) {
                Err(e) => Err(toml_error(text, &e)),
                Ok(_) => Err(Error::Parse { message, line: None }),
            }
        }
        r => r,
    }
}

/// Deserializes a parsed document and builds the validated scenario.
pub fn resolve_scenario(doc: &Value) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_value(doc.clone()).map_err(|e| Error::Parse {
        message: e.to_string(),
        line: None,
    })?;
    file.resolve()
}

impl ScenarioFile {
    pub fn resolve(self) -> Result<Scenario> {
        let topology = build_topology(&self.topology)?;
        topology.validate()?;
        let n = topology.node_count();
        let sink = topology.sink;
        let ch = &self.channel;

        let sigma = match (&ch.sigma, &ch.sigma_db) {
            (Some(_), Some(_)) => {
                return Err(Error::Validation("channel: give sigma or sigma_db, not both".into()))
            }
            (Some(s), None) => per_node("channel.sigma", s, n, sink)?,
            (None, Some(s)) => per_node("channel.sigma_db", s, n, sink)?
                .into_iter()
                .map(|x| x * NEPER_PER_DB)
                .collect(),
            (None, None) => vec![0.0; n],
        };
        let kappa = match &ch.kappa {
            KappaSpec::Value(k) => Multipath::Nakagami(*k),
            KappaSpec::Word(w) if matches!(w.as_str(), "disabled" | "off" | "none") => Multipath::Disabled,
            KappaSpec::Word(w) => {
                return Err(Error::Validation(format!(
                    "channel.kappa = '{w}': expected a number or \"disabled\""
                )))
            }
        };
        let rho = ch.rho.as_deref().map(CorrMatrix::from_rows).transpose()?;
        let mut lambda = per_node("traffic.lambda", &self.traffic.lambda, n, sink)?;
        lambda[sink] = 0.0;
        let queue = match &self.traffic.queue {
            None => vec![QueueProbs::default(); n],
            Some(q) => per_node("traffic.queue", q, n, sink)?,
        };

        let mut sc = Scenario {
            id: self.id,
            topology,
            channel: ChannelParams {
                c0_db: ch.c0_db,
                k: ch.k,
                n0_dbm: ch.n0_dbm,
                a_dbm: ch.a_dbm,
                b_db: ch.b_db,
            },
            fading: FadingParams { sigma, kappa, rho },
            ptx_dbm: ch.ptx_dbm,
            mac: self.mac,
            timing: self.timing,
            power: self.power,
            lambda,
            queue,
            solver: self.solver,
            sim: self.sim,
            warnings: Vec::new(),
        };
        sc.validate()?;
        Ok(sc)
    }
}

/// Expands a per-node value. A list one shorter than the node count skips the sink.
fn per_node<T: Clone + Default>(name: &str, v: &PerNode<T>, n: usize, sink: usize) -> Result<Vec<T>> {
    match v {
        PerNode::All(x) => Ok(vec![x.clone(); n]),
        PerNode::Each(xs) if xs.len() == n => Ok(xs.clone()),
        PerNode::Each(xs) if xs.len() + 1 == n => {
            let mut out = xs.clone();
            out.insert(sink, T::default());
            Ok(out)
        }
        PerNode::Each(xs) => Err(Error::Validation(format!(
            "{name} has {} entries; expected {n} (every node) or {} (all but the sink)",
            xs.len(),
            n - 1
        ))),
    }
}

fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Validation(format!("topology.{name} = {v} must be > 0")))
        }
    };
    let nodes = |n: usize| {
        if n == 0 {
            Err(Error::Topology("topology.nodes must be >= 1".into()))
        } else {
            Ok(())
        }
    };
    match *spec {
        TopologySpec::Star { nodes: n, radius_m } => {
            nodes(n)?;
            positive("radius_m", radius_m)?;
            Ok(Topology::star(n, radius_m))
        }
        TopologySpec::Line { nodes: n, hop_m } => {
            nodes(n)?;
            positive("hop_m", hop_m)?;
            Ok(Topology::line(n, hop_m))
        }
        TopologySpec::Tree { nodes: n, fanout, hop_m } => {
            nodes(n)?;
            positive("hop_m", hop_m)?;
            if fanout == 0 {
                return Err(Error::Topology("topology.fanout must be >= 1".into()));
            }
            Ok(Topology::tree(n, fanout, hop_m))
        }
        TopologySpec::Explicit {
            ref positions,
            ref routes,
            sink,
        } => {
            let n = positions.len();
            let mut next_hop = vec![None; n];
            for &[src, dst] in routes {
                if src >= n || dst >= n {
                    return Err(Error::Topology(format!("route [{src}, {dst}] names a missing node")));
                }
                if next_hop[src].replace(dst).is_some() {
                    return Err(Error::Topology(format!("node {src} has more than one route")));
                }
            }
            Ok(Topology {
                positions: positions.iter().map(|&[x, y]| Position { x, y }).collect(),
                next_hop,
                sink,
            })
        }
    }
}
