//! Scenario description shared by both engines, configuration loading and
//! sweep orchestration.

mod config;
mod sweep;

pub use config::{
    apply_overrides, load_scenario, parse_document, parse_scenario, parse_value, resolve_scenario, set_path,
    ChannelSpec, KappaSpec, PerNode, ScenarioFile, TopologySpec, TrafficSpec,
};
pub use sweep::{
    format_number, run_sweep, sweep_csv, sweep_points, Engine, SweepParam, SweepSpec, CSV_HEADER_FIXED,
    DEFAULT_MAX_POINTS,
};

use crate::channel::{ChannelParams, FadingParams};
use crate::error::{Error, Result};
use crate::macmodel::{AnalyticModel, MacParams, QueueProbs, SolverConfig, TimingParams};
use crate::metrics::PowerProfile;
use crate::multihop::{solve_network, NetworkSolution};
use crate::sim::{run_experiment, SimConfig, SimStats};
use crate::topology::Topology;
use serde::Serialize;

/// A fully resolved and validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub id: String,
    pub topology: Topology,
    pub channel: ChannelParams,
    pub fading: FadingParams,
    pub ptx_dbm: f64,
    pub mac: MacParams,
    pub timing: TimingParams,
    pub power: PowerProfile,
    /// Generation rate per node, pkt/s; zero at the sink.
    pub lambda: Vec<f64>,
    pub queue: Vec<QueueProbs>,
    pub solver: SolverConfig,
    pub sim: SimConfig,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Checks cross-field invariants and collects warnings.
    pub fn validate(&mut self) -> Result<()> {
        self.topology.validate()?;
        let n = self.topology.node_count();
        self.warnings = self.channel.validate()?;
        self.fading.validate()?;
        self.mac.validate()?;
        self.timing.validate()?;
        self.power.validate()?;
        self.solver.validate()?;
        self.sim.validate()?;
        if !self.ptx_dbm.is_finite() {
            return Err(Error::Validation("ptx_dbm must be finite".into()));
        }
        if self.fading.sigma.len() != n || self.lambda.len() != n || self.queue.len() != n {
            return Err(Error::Validation(format!(
                "per-node vectors must have {n} entries (sigma {}, lambda {}, queue {})",
                self.fading.sigma.len(),
                self.lambda.len(),
                self.queue.len()
            )));
        }
        for q in &self.queue {
            q.validate()?;
        }
        for (i, l) in self.lambda.iter().enumerate() {
            if i == self.topology.sink {
                continue;
            }
            if !(l.is_finite() && *l > 0.0) {
                return Err(Error::Validation(format!("traffic: lambda of node {i} = {l} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn analytic_model(&self) -> Result<AnalyticModel> {
        AnalyticModel::new(
            &self.topology,
            &self.channel,
            &self.fading,
            self.ptx_dbm,
            self.mac,
            self.timing,
            self.solver.enumeration_cap,
        )
    }

    /// Runs the analytic engine, including the multi-hop traffic loop.
    pub fn analyze(&self) -> Result<NetworkSolution> {
        let model = self.analytic_model()?;
        solve_network(&self.topology, &model, &self.lambda, &self.queue, &self.power, &self.solver)
    }

    pub fn simulate(&self) -> Result<SimStats> {
        run_experiment(self, &self.sim)
    }
}
