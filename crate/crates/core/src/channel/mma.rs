//! Moment matching of a weighted sum of (possibly Nakagami-weighted)
//! lognormal components by a single lognormal.

use super::{CorrMatrix, FadingParams, PowerTerm};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `ln(sum) ~ N(eta, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalApprox {
    pub eta: f64,
    pub sigma: f64,
    /// Set when rounding pushed the fitted variance below zero and it was clamped.
    pub clamped: bool,
}

impl LognormalApprox {
    pub fn mean(&self) -> f64 {
        (self.eta + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn second_moment(&self) -> f64 {
        (2.0 * self.eta + 2.0 * self.sigma * self.sigma).exp()
    }

    /// `P[exp(N(eta, sigma^2)) <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let lx = x.ln();
        if self.sigma == 0.0 {
            return if lx < self.eta { 0.0 } else { 1.0 };
        }
        1.0 - super::q_function((lx - self.eta) / self.sigma)
    }
}

/// Fits the first two moments of `Σ w_n f_n exp(y_n)`, where `corr` holds
/// the correlation of the `y_n` (same order as `terms`).
pub fn mma_fit(terms: &[PowerTerm], corr: &CorrMatrix, fading: &FadingParams) -> Result<LognormalApprox> {
    if corr.len() != terms.len() {
        return Err(Error::Domain(format!(
            "correlation matrix is {}x{} for {} terms",
            corr.len(),
            corr.len(),
            terms.len()
        )));
    }
    mma_fit_cov(terms, |m, n| corr.get(m, n) * terms[m].sigma * terms[n].sigma, fading)
}

/// Same as [`mma_fit`] with an explicit exponent covariance `cov(m, n)`.
/// The diagonal of `cov` must equal `sigma^2` of each term.
pub fn mma_fit_cov<C>(terms: &[PowerTerm], cov: C, fading: &FadingParams) -> Result<LognormalApprox>
where
    C: Fn(usize, usize) -> f64,
{
    if terms.is_empty() {
        return Err(Error::Domain("moment matching needs at least one term".into()));
    }
    if let Some(t) = terms.iter().find(|t| !(t.weight > 0.0) || !(t.sigma >= 0.0)) {
        return Err(Error::Domain(format!(
            "power term needs weight > 0 and sigma >= 0, got {t:?}"
        )));
    }
    let f2 = fading.kappa.second_moment();

    // Work relative to the largest weight so M2 stays representable.
    let scale = terms.iter().map(|t| t.weight).fold(0.0, f64::max);
    let w: Vec<f64> = terms.iter().map(|t| t.weight / scale).collect();

    let m1: f64 = terms
        .iter()
        .zip(&w)
        .map(|(t, w)| w * (0.5 * t.sigma * t.sigma).exp())
        .sum();
    let mut m2 = 0.0;
    for (m, tm) in terms.iter().enumerate() {
        for (n, tn) in terms.iter().enumerate() {
            let fading_moment = if m == n && tm.has_multipath { f2 } else { 1.0 };
            let exponent = 0.5 * tm.sigma * tm.sigma + 0.5 * tn.sigma * tn.sigma + cov(m, n);
            m2 += w[m] * w[n] * fading_moment * exponent.exp();
        }
    }

    let ln_m1 = m1.ln();
    let ln_m2 = m2.ln();
    let mut var = ln_m2 - 2.0 * ln_m1;
    let mut clamped = false;
    if var < 0.0 {
        var = 0.0;
        clamped = true;
    }
    let eta = 2.0 * ln_m1 - 0.5 * ln_m2 + scale.ln();
    Ok(LognormalApprox {
        eta,
        sigma: var.sqrt(),
        clamped,
    })
}
