//! Node placement and next-hop routing shared by both engines.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A directed link `tx -> rx`; every non-sink node owns exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub positions: Vec<Position>,
    /// `next_hop[i]` is `None` only for the sink.
    pub next_hop: Vec<Option<usize>>,
    pub sink: usize,
}

impl Topology {
    /// Sink at the origin, `n` nodes evenly spaced on a circle of `radius`.
    pub fn star(n: usize, radius: f64) -> Self {
        let mut positions = vec![Position { x: 0.0, y: 0.0 }];
        let mut next_hop = vec![None];
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            positions.push(Position {
                x: radius * th.cos(),
                y: radius * th.sin(),
            });
            next_hop.push(Some(0));
        }
        Self {
            positions,
            next_hop,
            sink: 0,
        }
    }

    /// Sink at the origin, node `k` at `k * hop` on the x axis forwarding to `k - 1`.
    pub fn line(n: usize, hop: f64) -> Self {
        let positions = (0..=n)
            .map(|k| Position {
                x: k as f64 * hop,
                y: 0.0,
            })
            .collect();
        let next_hop = (0..=n).map(|k| k.checked_sub(1)).collect();
        Self {
            positions,
            next_hop,
            sink: 0,
        }
    }

    /// Complete `fanout`-ary tree rooted at the sink, filled breadth first.
    /// Depth-`d` nodes sit at radius `d * hop`, centred in their parent's sector.
    pub fn tree(n: usize, fanout: usize, hop: f64) -> Self {
        let fanout = fanout.max(1);
        let mut positions = vec![Position { x: 0.0, y: 0.0 }];
        let mut next_hop = vec![None];
        // (depth, sector start, sector width) per node
        let mut sector = vec![(0usize, 0.0f64, 2.0 * std::f64::consts::PI)];
        for i in 1..=n {
            let parent = (i - 1) / fanout;
            let slot = (i - 1) % fanout;
            let (pd, start, width) = sector[parent];
            let w = width / fanout as f64;
            let s = start + slot as f64 * w;
            let th = s + 0.5 * w;
            let r = (pd + 1) as f64 * hop;
            positions.push(Position {
                x: r * th.cos(),
                y: r * th.sin(),
            });
            next_hop.push(Some(parent));
            sector.push((pd + 1, s, w));
        }
        Self {
            positions,
            next_hop,
            sink: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Links in node order (the sink has none).
    pub fn links(&self) -> Vec<Link> {
        self.next_hop
            .iter()
            .enumerate()
            .filter_map(|(tx, nh)| nh.map(|rx| Link { tx, rx }))
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.positions[a].distance(&self.positions[b])
    }

    /// Nodes whose next hop is `node`.
    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.next_hop[i] == Some(node))
            .collect()
    }

    pub fn is_relay(&self, node: usize) -> bool {
        node != self.sink && self.next_hop.contains(&Some(node))
    }

    /// Nodes from `node` to the sink, `node` first and the sink excluded.
    pub fn path_to_sink(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while cur != self.sink {
            path.push(cur);
            match self.next_hop[cur] {
                Some(nh) => cur = nh,
                None => break,
            }
            if path.len() > self.node_count() {
                break;
            }
        }
        path
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        if n < 2 {
            return Err(Error::Topology("need a sink and at least one node".into()));
        }
        if self.next_hop.len() != n {
            return Err(Error::Topology("next_hop length differs from node count".into()));
        }
        if self.sink >= n || self.next_hop[self.sink].is_some() {
            return Err(Error::Topology("the sink must exist and have no next hop".into()));
        }
        for (i, nh) in self.next_hop.iter().enumerate() {
            match nh {
                None if i != self.sink => {
                    return Err(Error::Topology(format!("node {i} has no route to the sink")))
                }
                Some(j) if *j >= n => {
                    return Err(Error::Topology(format!("node {i} routes to missing node {j}")))
                }
                Some(j) if *j == i => return Err(Error::Topology(format!("node {i} routes to itself"))),
                _ => {}
            }
        }
        for i in 0..n {
            let mut cur = i;
            let mut steps = 0;
            while let Some(nh) = self.next_hop[cur] {
                cur = nh;
                steps += 1;
                if steps > n {
                    return Err(Error::Topology(format!("routing from node {i} contains a cycle")));
                }
            }
        }
        for a in 0..n {
            for b in (a + 1)..n {
                if self.distance(a, b) <= 0.0 {
                    return Err(Error::Topology(format!("nodes {a} and {b} are co-located")));
                }
            }
        }
        Ok(())
    }
}
