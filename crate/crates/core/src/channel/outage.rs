use super::mma::{mma_fit_cov, LognormalApprox};
use super::quadrature;
use super::{q_function, CorrMatrix, FadingParams, Multipath, PowerTerm};
use crate::error::{Error, Result};

/// Absolute error budget of the outage integral.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Probability that the aggregate power of `terms` exceeds `a_mw`.
///
/// `corr` is the correlation of the terms' shadowing exponents; `None`
/// means independent.
pub fn detection_probability(
    terms: &[PowerTerm],
    corr: Option<&CorrMatrix>,
    a_mw: f64,
    fading: &FadingParams,
) -> Result<f64> {
    let fit = match corr {
        Some(c) => super::mma_fit(terms, c, fading)?,
        None => mma_fit_cov(terms, |m, n| independent_cov(terms, m, n), fading)?,
    };
    Ok(exceed_probability(&fit, a_mw))
}

fn independent_cov(terms: &[PowerTerm], m: usize, n: usize) -> f64 {
    if m == n {
        terms[m].sigma * terms[m].sigma
    } else {
        0.0
    }
}

fn exceed_probability(fit: &LognormalApprox, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        return 1.0;
    }
    let la = threshold.ln();
    if fit.sigma == 0.0 {
        return if la < fit.eta { 1.0 } else { 0.0 };
    }
    q_function((la - fit.eta) / fit.sigma)
}

/// Composition of the SINR denominator for one link: the useful signal,
/// the concurrently active interferers, and the noise floor.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageTerms<'a> {
    pub useful: PowerTerm,
    pub interferers: &'a [PowerTerm],
    pub noise_mw: f64,
    /// Correlation of `[y_useful, y_1, ..., y_x]`; `None` means independent.
    pub corr: Option<&'a CorrMatrix>,
}

/// `P[SINR < b]` for the useful link against the interferers plus noise.
///
/// The denominator `Σ B_n exp(y_n - y_u) + (N0/P_u) exp(-y_u)` is fitted by
/// a lognormal, whose covariance carries the shared `-y_u` component. With
/// Nakagami fading on the useful signal the residual expectation over the
/// fitted lognormal is integrated numerically.
pub fn outage_probability(terms: &OutageTerms<'_>, b_linear: f64, fading: &FadingParams) -> Result<f64> {
    let u = terms.useful;
    if !(u.weight > 0.0) {
        return Err(Error::Domain("useful power must be positive".into()));
    }
    if !(terms.noise_mw > 0.0) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    if let Some(c) = terms.corr {
        if c.len() != terms.interferers.len() + 1 {
            return Err(Error::Domain(format!(
                "correlation matrix is {}x{} for {} base variables",
                c.len(),
                c.len(),
                terms.interferers.len() + 1
            )));
        }
    }
    if b_linear <= 0.0 {
        return Ok(0.0);
    }

    let x = terms.interferers.len();
    // base variables: 0 = useful, 1..=x interferers
    let base_sigma = |v: usize| if v == 0 { u.sigma } else { terms.interferers[v - 1].sigma };
    let base_cov = |p: usize, q: usize| {
        let r = match terms.corr {
            Some(c) => c.get(p, q),
            None if p == q => 1.0,
            None => 0.0,
        };
        r * base_sigma(p) * base_sigma(q)
    };

    // denominator terms: 0..x interferers (exponent y_n - y_u), x = noise (-y_u)
    let mut den: Vec<PowerTerm> = terms
        .interferers
        .iter()
        .map(|t| {
            let var = t.sigma * t.sigma + u.sigma * u.sigma;
            PowerTerm::new(t.weight / u.weight, var.max(0.0).sqrt(), t.has_multipath)
        })
        .collect();
    den.push(PowerTerm::new(terms.noise_mw / u.weight, u.sigma, false));

    let cov = |m: usize, n: usize| -> f64 {
        // exponent of denominator term k as (base index, sign) pairs
        let parts = |k: usize| -> [(usize, f64); 2] {
            if k < x {
                [(k + 1, 1.0), (0, -1.0)]
            } else {
                [(0, -1.0), (0, 0.0)]
            }
        };
        let mut acc = 0.0;
        for (p, sp) in parts(m) {
            for (q, sq) in parts(n) {
                if sp != 0.0 && sq != 0.0 {
                    acc += sp * sq * base_cov(p, q);
                }
            }
        }
        acc
    };
    let fit = mma_fit_cov(&den, cov, fading)?;

    match (fading.kappa, u.has_multipath) {
        (Multipath::Nakagami(kappa), true) => nakagami_outage(&fit, b_linear, kappa),
        _ => Ok(exceed_probability(&fit, 1.0 / b_linear)),
    }
}

/// `E_S[P(f < b S)]` with `f ~ Gamma(kappa, 1/kappa)` and `ln S` normal.
fn nakagami_outage(fit: &LognormalApprox, b: f64, kappa: f64) -> Result<f64> {
    let cdf = |ln_s: f64| gamma_cdf_unit_mean(kappa, kappa * b * ln_s.exp());
    if fit.sigma == 0.0 {
        return Ok(cdf(fit.eta));
    }
    match quadrature::normal_expectation(fit.eta, fit.sigma, cdf, QUADRATURE_TOL) {
        Some(p) => Ok(p.clamp(0.0, 1.0)),
        None => Err(Error::Numeric {
            message: format!(
                "outage integral did not converge (eta {}, sigma {}, kappa {kappa})",
                fit.eta, fit.sigma
            ),
            diagnostics: vec![format!(
                "15-point composite estimate on 256 panels: {:.12}",
                quadrature::composite(
                    &|z: f64| quadrature::std_normal_pdf(z) * cdf(fit.eta + fit.sigma * z),
                    -quadrature::NORMAL_SPAN,
                    quadrature::NORMAL_SPAN,
                    256
                )
            )],
        }),
    }
}

/// Regularized lower incomplete gamma `P(kappa, x)`; finite Poisson series
/// for integer `kappa`.
pub(crate) fn gamma_cdf_unit_mean(kappa: f64, x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if kappa.fract() == 0.0 && kappa <= 200.0 {
        let lx = x.ln();
        let mut tail = 0.0;
        let mut log_fact = 0.0;
        for i in 0..kappa as usize {
            if i > 0 {
                log_fact += (i as f64).ln();
            }
            tail += (-x + i as f64 * lx - log_fact).exp();
        }
        (1.0 - tail).clamp(0.0, 1.0)
    } else {
        statrs::function::gamma::gamma_lr(kappa, x)
    }
}
