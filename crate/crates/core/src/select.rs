//! Marginal likelihoods, Bayes factors and DIC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::ChainDraws;
use crate::model::Evaluator;
use crate::panel::PanelData;
use crate::stats::{mean, quantile_sorted};

/// Bootstrap intervals wider than this many nats are flagged as unstable.
pub const CI_WARNING_WIDTH: f64 = 2.0;

/// Harmonic-mean estimate of the log marginal likelihood from per-draw
/// log-likelihoods: `−log mean exp(−ℓ)`, max-shift stabilized.
pub fn log_marginal_harmonic(loglik: &[f64]) -> Result<f64> {
    if loglik.is_empty() {
        return Err(Error::Data("no log-likelihood draws".into()));
    }
    if let Some(bad) = loglik.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite log-likelihood draw {bad}")));
    }
    Ok(harmonic_unchecked(loglik.iter().map(|v| -v)))
}

fn harmonic_unchecked(neg: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = neg.clone().count() as f64;
    let m = neg.clone().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = neg.map(|v| (v - m).exp()).sum();
    -(m + s.ln() - n.ln())
}

/// `ln B₂₁ = ln f(Y|M₂) − ln f(Y|M₁)`; positive values favor model 2.
pub fn bayes_log_factor(log_ml_2: f64, log_ml_1: f64) -> f64 {
    log_ml_2 - log_ml_1
}

/// Percentile bootstrap interval of [`log_marginal_harmonic`].
pub fn bootstrap_log_ml_ci(loglik: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    log_marginal_harmonic(loglik)?;
    if n_boot == 0 {
        return Err(Error::Config("n_boot must be positive".into()));
    }
    let n = loglik.len();
    let mut est: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let neg: Vec<f64> = (0..n).map(|_| -loglik[rng.random_range(0..n)]).collect();
            harmonic_unchecked(neg.iter().copied())
        })
        .collect();
    est.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&est, a), quantile_sorted(&est, 1.0 - a)))
}

/// `DIC = 2·E[D] − D(θ̄)`.
pub fn dic(deviance_draws: &[f64], deviance_at_mean: f64) -> f64 {
    2.0 * mean(deviance_draws) - deviance_at_mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub log_ml: f64,
    pub log_ml_ci: (f64, f64),
    /// Raw bootstrap percentile interval before it is extended to contain
    /// `log_ml`.
    pub log_ml_ci_raw: (f64, f64),
    pub ci_unstable: bool,
    pub dic: f64,
    /// How latent states enter `D(θ̄)`.
    pub dic_states: String,
    pub posterior_mean_loglik: f64,
    pub max_observed_loglik: f64,
}

/// Evidence summary of a posterior sample.
pub fn evidence_report(draws: &ChainDraws, data: &PanelData, n_boot: usize, seed: u64) -> Result<EvidenceReport> {
    let ll = draws.pooled_loglik();
    let log_ml = log_marginal_harmonic(&ll)?;
    let raw = bootstrap_log_ml_ci(&ll, n_boot, 0.95, seed)?;
    let ci = (raw.0.min(log_ml), raw.1.max(log_ml));
    let ci_unstable = ci.1 - ci.0 > CI_WARNING_WIDTH;
    if ci_unstable {
        log::warn!(
            "log marginal likelihood interval ({:.2}, {:.2}) is wider than {CI_WARNING_WIDTH} nats",
            ci.0,
            ci.1
        );
    }
    let spec = &draws.spec;
    let eval = Evaluator::new(spec, data)?;
    let point = draws.posterior_mean_params();
    point.validate(spec, data.n_covariates(), data.n_segments())?;
    let d_bar = -2.0 * eval.integrated(&point);
    let deviance: Vec<f64> = ll.iter().map(|v| -2.0 * v).collect();
    Ok(EvidenceReport {
        log_ml,
        log_ml_ci: ci,
        log_ml_ci_raw: raw,
        ci_unstable,
        dic: dic(&deviance, d_bar),
        dic_states: if spec.is_switching() { "integrated" } else { "none" }.into(),
        posterior_mean_loglik: mean(&ll),
        max_observed_loglik: ll.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws() {
        let v = vec![-100.0; 150];
        assert!((log_marginal_harmonic(&v).unwrap() + 100.0).abs() < 1e-12);
        let (lo, hi) = bootstrap_log_ml_ci(&v, 200, 0.95, 3).unwrap();
        assert!((lo + 100.0).abs() < 1e-12 && (hi + 100.0).abs() < 1e-12);
    }

    #[test]
    fn two_term_value() {
        let l2 = 2f64.ln();
        let got = log_marginal_harmonic(&[-1.0, -1.0 + l2]).unwrap();
        let want = -(1.5f64).ln() - 1.0 + l2;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(log_marginal_harmonic(&[-1.0, f64::NAN]), Err(Error::Data(_))));
        assert!(matches!(log_marginal_harmonic(&[-1.0, f64::NEG_INFINITY]), Err(Error::Data(_))));
    }

    #[test]
    fn dic_arithmetic() {
        assert_eq!(dic(&[10.0, 10.0], 6.0), 14.0);
        assert_eq!(dic(&[7.5; 4], 7.5), 7.5);
        let d = [3.0, 5.0, 9.0];
        let shifted: Vec<f64> = d.iter().map(|v| v - 2.0).collect();
        assert!((dic(&d, 4.0) - dic(&shifted, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reported_log_factors() {
        assert_eq!(format!("{:.2}", bayes_log_factor(-2184.21, -2519.90)), "335.69");
        assert_eq!(format!("{:.2}", bayes_log_factor(-2184.21, -2447.33)), "263.12");
        assert_eq!(bayes_log_factor(-3.0, -3.0), 0.0);
    }
}
