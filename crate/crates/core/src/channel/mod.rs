//! Physical-layer probabilities: mean received power, lognormal moment
//! matching, carrier-sense detection and SINR outage under lognormal or
//! Nakagami-lognormal fading.

mod mma;
mod outage;
pub mod quadrature;

pub use mma::{mma_fit, mma_fit_cov, LognormalApprox};
pub use outage::{detection_probability, outage_probability, OutageTerms};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Natural-log units per decibel.
pub const NEPER_PER_DB: f64 = std::f64::consts::LN_10 / 10.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Propagation constants and receiver thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Power gain at 1 m, dB (negative of the reference path loss).
    pub c0_db: f64,
    /// Path-loss exponent.
    pub k: f64,
    pub n0_dbm: f64,
    /// Carrier-sensing threshold.
    pub a_dbm: f64,
    /// Capture threshold on SINR.
    pub b_db: f64,
}

impl ChannelParams {
    /// Checks the hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(1.5..=6.0).contains(&self.k) {
            return Err(Error::Validation(format!(
                "channel.k = {} outside [1.5, 6]",
                self.k
            )));
        }
        let loss = -self.c0_db;
        if !(30.0..=80.0).contains(&loss) {
            return Err(Error::Validation(format!(
                "channel.c0_db = {} gives a reference path loss outside [30, 80] dB",
                self.c0_db
            )));
        }
        if !(40.0..=60.0).contains(&loss) {
            warnings.push(format!(
                "reference path loss {loss} dB is outside the usual 40-60 dB range"
            ));
        }
        for (name, v) in [("n0_dbm", self.n0_dbm), ("a_dbm", self.a_dbm), ("b_db", self.b_db)] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("channel.{name} must be finite")));
            }
        }
        Ok(warnings)
    }

    pub fn c0_linear(&self) -> f64 {
        db_to_linear(self.c0_db)
    }

    pub fn noise_mw(&self) -> f64 {
        db_to_linear(self.n0_dbm)
    }

    pub fn a_mw(&self) -> f64 {
        db_to_linear(self.a_dbm)
    }

    pub fn b_linear(&self) -> f64 {
        db_to_linear(self.b_db)
    }
}

/// Multi-path fading model applied to every propagated signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Multipath {
    /// `f ≡ 1`.
    Disabled,
    /// Unit-mean Gamma power gain with shape `kappa` (Nakagami-m amplitude).
    Nakagami(f64),
}

impl Multipath {
    pub fn kappa(&self) -> Option<f64> {
        match *self {
            Multipath::Disabled => None,
            Multipath::Nakagami(k) => Some(k),
        }
    }

    /// `E{f^2}` of the power gain.
    pub fn second_moment(&self) -> f64 {
        match *self {
            Multipath::Disabled => 1.0,
            Multipath::Nakagami(k) => (k + 1.0) / k,
        }
    }
}

/// Symmetric correlation matrix between shadowing exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CorrMatrix {
    pub fn independent(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("correlation matrix must be square".into()));
        }
        let m = Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn is_independent(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) == 0.0))
    }

    /// Restriction to the listed indices, in order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut data = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        Self { n, data }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if (self.get(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::Validation("correlation diagonal must be 1".into()));
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                    return Err(Error::Validation(format!("correlation ({i},{j}) = {v} not in [-1,1]")));
                }
                if (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Validation("correlation matrix must be symmetric".into()));
                }
            }
        }
        if n > 0 {
            let m = nalgebra::DMatrix::from_row_slice(n, n, &self.data);
            let min_eig = m
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min_eig < -1e-9 {
                return Err(Error::Validation(format!(
                    "correlation matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Shadowing spreads (nepers) per node, multi-path model, and optional
/// node-to-node shadowing correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub sigma: Vec<f64>,
    pub kappa: Multipath,
    pub rho: Option<CorrMatrix>,
}

impl FadingParams {
    pub fn uniform(nodes: usize, sigma: f64, kappa: Multipath) -> Self {
        Self {
            sigma: vec![sigma; nodes],
            kappa,
            rho: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Validation(format!("sigma = {s} must be finite and >= 0")));
        }
        if let Multipath::Nakagami(k) = self.kappa {
            if !(k.is_finite() && k >= 0.5) {
                return Err(Error::Validation(format!("kappa = {k} must be >= 0.5")));
            }
        }
        if let Some(rho) = &self.rho {
            if rho.len() != self.sigma.len() {
                return Err(Error::Validation(format!(
                    "correlation matrix is {}x{} but there are {} nodes",
                    rho.len(),
                    rho.len(),
                    self.sigma.len()
                )));
            }
        }
        Ok(())
    }

    pub fn corr(&self, i: usize, j: usize) -> f64 {
        match &self.rho {
            Some(r) => r.get(i, j),
            None if i == j => 1.0,
            None => 0.0,
        }
    }
}

/// One lognormal component `weight · f · exp(y)`, `y ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub weight: f64,
    pub sigma: f64,
    pub has_multipath: bool,
}

impl PowerTerm {
    pub fn new(weight: f64, sigma: f64, has_multipath: bool) -> Self {
        Self {
            weight,
            sigma,
            has_multipath,
        }
    }
}

/// Mean received power `c0 · P_tx / r^k` in mW, fading excluded.
pub fn mean_rx_power(ptx_dbm: f64, distance_m: f64, params: &ChannelParams) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    Ok(params.c0_linear() * db_to_linear(ptx_dbm) / distance_m.powf(params.k))
}

/// Gaussian tail `Q(z) = P[N(0,1) > z]`.
pub fn q_function(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}
