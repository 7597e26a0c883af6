//! Posterior and MLE summaries, fit reports and plot extracts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{convergence_report, ConvergenceReport};
use crate::dists::{log_sigmoid, sigmoid};
use crate::error::{Error, Result};
use crate::gof::{gof_pvalue, GofResult};
use crate::mcmc::{state_posterior, ChainDraws, McmcConfig, PriorConfig};
use crate::mle::{wald_intervals, MleResult};
use crate::model::{Evaluator, ModelSpec, ParamSet};
use crate::panel::PanelData;
use crate::select::{evidence_report, EvidenceReport};
use crate::stats::{mean, quantile_sorted};

pub const SCHEMA_VERSION: u32 = 1;
/// Segments whose largest normal-count probability stays below this are
/// likely in the zero state throughout.
pub const LIKELY_ZERO_THRESHOLD: f64 = 0.2;

/// Equal-tail interval from empirical quantiles at `a/2` and `1 − a/2`,
/// `a = 1 − level`.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Data("a credible interval needs at least two samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&v, a), quantile_sorted(&v, 1.0 - a)))
}

/// Mean of `λ` and of `√(λ(1 + αλ))` over every cell at the given point.
pub fn rate_summaries(params: &ParamSet, data: &PanelData) -> (f64, f64) {
    let alpha = params.alpha().unwrap_or(0.0);
    let n = data.n_cells() as f64;
    let (mut rate, mut sd) = (0.0, 0.0);
    for c in 0..data.n_cells() {
        let lambda = crate::dists::dot(&params.beta, data.x_cell(c)).exp();
        rate += lambda;
        sd += (lambda * (1.0 + alpha * lambda)).sqrt();
    }
    (rate / n, sd / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentCategory {
    /// Positive counts in every period, hence certainly normal-count.
    NormalCount,
    /// No counts and `max_t P(s=1|Y) < 0.2`.
    LikelyZeroState,
    /// No counts but the state cannot be resolved.
    Uncertain,
    /// Some periods with counts, some without.
    Mixed,
}

pub fn categorize(counts: &[u64], series: &[f64]) -> SegmentCategory {
    if counts.iter().all(|&a| a > 0) {
        SegmentCategory::NormalCount
    } else if counts.iter().all(|&a| a == 0) {
        if series.iter().copied().fold(0.0, f64::max) < LIKELY_ZERO_THRESHOLD {
            SegmentCategory::LikelyZeroState
        } else {
            SegmentCategory::Uncertain
        }
    } else {
        SegmentCategory::Mixed
    }
}

/// Per-cell `P(s=1 | Y)` of a zero-inflated model at a point estimate.
pub fn zero_inflated_state_probs(spec: &ModelSpec, params: &ParamSet, data: &PanelData) -> Result<Vec<f64>> {
    if !spec.is_zero_inflated() {
        return Err(Error::Spec(format!("{} is not zero-inflated", spec.name())));
    }
    let eval = Evaluator::new(spec, data)?;
    let kernel = eval.kernel_for(params);
    let etas = eval.etas(&params.beta);
    Ok(data
        .counts()
        .iter()
        .zip(&etas)
        .enumerate()
        .map(|(c, (&a, &eta))| {
            if a > 0 {
                return 1.0;
            }
            let z = eval.zero_logit(params, c, eta);
            let log_one = log_sigmoid(-z) + kernel.log_pmf_zero(eta);
            sigmoid(log_one - log_sigmoid(z))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: u32,
    pub model: String,
    pub spec: ModelSpec,
    pub method: String,
    pub n_segments: usize,
    pub n_periods: usize,
    pub mcmc: Option<McmcConfig>,
    pub priors: Option<PriorConfig>,
    pub interval_kind: String,
    pub interval_level: f64,
    pub parameters: Vec<ParamSummary>,
    /// Point estimate used for goodness of fit and rate summaries.
    pub point: ParamSet,
    pub max_loglik: Option<f64>,
    pub aic: Option<f64>,
    pub optimizer_converged: Option<bool>,
    pub hessian_singular: Option<bool>,
    pub evidence: Option<EvidenceReport>,
    pub gof: Option<GofResult>,
    pub convergence: Option<ConvergenceReport>,
    /// `P(s=1|Y)` per segment and period.
    pub state_series: Option<Vec<Vec<f64>>>,
    pub segment_categories: Option<Vec<SegmentCategory>>,
    pub stationary_expectations: Option<Vec<f64>>,
    pub long_run_means: Option<Vec<f64>>,
    pub mean_rate: f64,
    pub mean_sd_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub level: f64,
    /// Goodness-of-fit replications; zero skips the test.
    pub gof_reps: usize,
    pub psrf_threshold: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            gof_reps: 10_000,
            psrf_threshold: crate::diagnostics::DEFAULT_THRESHOLD,
            n_boot: 1000,
            seed: 1,
        }
    }
}

fn run_gof(data: &PanelData, spec: &ModelSpec, point: &ParamSet, opts: &ReportOptions) -> Result<Option<GofResult>> {
    if opts.gof_reps == 0 {
        return Ok(None);
    }
    match gof_pvalue(data, spec, point, opts.gof_reps, opts.seed) {
        Ok(g) => Ok(Some(g)),
        Err(Error::DegenerateCells(k)) => {
            log::warn!("goodness of fit skipped: {k} count category after pooling");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn segment_rate_means(params: &ParamSet, data: &PanelData) -> Vec<f64> {
    (0..data.n_segments())
        .map(|n| {
            let rates: Vec<f64> = (0..data.n_periods())
                .map(|t| crate::dists::dot(&params.beta, data.x(n, t)).exp())
                .collect();
            mean(&rates)
        })
        .collect()
}

fn series_rows(probs: &[f64], data: &PanelData) -> Vec<Vec<f64>> {
    probs.chunks(data.n_periods()).map(<[f64]>::to_vec).collect()
}

fn categories(series: &[Vec<f64>], data: &PanelData) -> Vec<SegmentCategory> {
    series
        .iter()
        .enumerate()
        .map(|(n, s)| categorize(data.segment_counts(n), s))
        .collect()
}

/// Report of a posterior sample.
pub fn mcmc_report(draws: &ChainDraws, data: &PanelData, opts: &ReportOptions) -> Result<FitReport> {
    let spec = &draws.spec;
    let mut parameters = Vec::new();
    for (j, name) in draws.names.iter().enumerate() {
        let v = draws.pooled_param(j);
        let (lower, upper) = credible_interval(&v, opts.level)?;
        parameters.push(ParamSummary { name: name.clone(), estimate: mean(&v), lower, upper, std_error: None });
        if name == "log_alpha" {
            let a: Vec<f64> = v.iter().map(|x| x.exp()).collect();
            let (lower, upper) = credible_interval(&a, opts.level)?;
            parameters.push(ParamSummary { name: "alpha".into(), estimate: mean(&a), lower, upper, std_error: None });
        }
    }
    let point = draws.posterior_mean_params();
    let evidence = evidence_report(draws, data, opts.n_boot, opts.seed)?;
    let convergence = match convergence_report(draws, opts.psrf_threshold) {
        Ok(c) => {
            if !c.converged {
                log::warn!("chains have not converged: max PSRF {:.3}, MPSRF {:.3}", c.max_psrf, c.mpsrf);
            }
            Some(c)
        }
        Err(e) => {
            log::warn!("convergence diagnostics unavailable: {e}");
            None
        }
    };
    let gof = run_gof(data, spec, &point, opts)?;
    let (mean_rate, mean_sd_rate) = rate_summaries(&point, data);

    let (mut state_series, mut stationary, mut long_run) = (None, None, None);
    if spec.is_switching() {
        let probs = state_posterior(draws)?;
        state_series = Some(series_rows(&probs.probs, data));
        let st = draws.stationary_expectations();
        long_run = Some(st.iter().zip(segment_rate_means(&point, data)).map(|(p, r)| p * r).collect());
        stationary = Some(st);
    } else if spec.is_zero_inflated() {
        state_series = Some(series_rows(&zero_inflated_state_probs(spec, &point, data)?, data));
    }
    let segment_categories = state_series.as_ref().map(|s| categories(s, data));

    Ok(FitReport {
        schema: SCHEMA_VERSION,
        model: spec.name().into(),
        spec: spec.clone(),
        method: "mcmc".into(),
        n_segments: data.n_segments(),
        n_periods: data.n_periods(),
        mcmc: Some(draws.config.clone()),
        priors: Some(draws.priors.clone()),
        interval_kind: "credible (quantile, possibly asymmetric)".into(),
        interval_level: opts.level,
        parameters,
        point,
        max_loglik: None,
        aic: None,
        optimizer_converged: None,
        hessian_singular: None,
        evidence: Some(evidence),
        gof,
        convergence,
        state_series,
        segment_categories,
        stationary_expectations: stationary,
        long_run_means: long_run,
        mean_rate,
        mean_sd_rate,
    })
}

/// Report of a maximum-likelihood fit.
pub fn mle_report(fit: &MleResult, data: &PanelData, opts: &ReportOptions) -> Result<FitReport> {
    let spec = &fit.spec;
    let intervals = fit.std_errors.as_ref().map(|se| wald_intervals(&fit.estimate_vector, se, opts.level));
    let mut parameters = Vec::new();
    for (j, name) in fit.names.iter().enumerate() {
        let est = fit.estimate_vector[j];
        let (lower, upper) = intervals.as_ref().map_or((f64::NAN, f64::NAN), |iv| iv[j]);
        let std_error = fit.std_errors.as_ref().map(|se| se[j]);
        parameters.push(ParamSummary { name: name.clone(), estimate: est, lower, upper, std_error });
        if name == "log_alpha" {
            parameters.push(ParamSummary {
                name: "alpha".into(),
                estimate: est.exp(),
                lower: lower.exp(),
                upper: upper.exp(),
                std_error: std_error.map(|s| s * est.exp()),
            });
        }
    }
    if intervals.is_none() {
        log::warn!("observed information is singular; intervals unavailable");
    }
    let point = fit.estimates.clone();
    let gof = run_gof(data, spec, &point, opts)?;
    let (mean_rate, mean_sd_rate) = rate_summaries(&point, data);
    let state_series = if spec.is_zero_inflated() {
        Some(series_rows(&zero_inflated_state_probs(spec, &point, data)?, data))
    } else {
        None
    };
    let segment_categories = state_series.as_ref().map(|s| categories(s, data));
    Ok(FitReport {
        schema: SCHEMA_VERSION,
        model: spec.name().into(),
        spec: spec.clone(),
        method: "mle".into(),
        n_segments: data.n_segments(),
        n_periods: data.n_periods(),
        mcmc: None,
        priors: None,
        interval_kind: "confidence (MLE, symmetric)".into(),
        interval_level: opts.level,
        parameters,
        point,
        max_loglik: Some(fit.max_loglik),
        aic: Some(fit.aic),
        optimizer_converged: Some(fit.converged),
        hessian_singular: Some(fit.hessian_singular),
        evidence: None,
        gof,
        convergence: None,
        state_series,
        segment_categories,
        stationary_expectations: None,
        long_run_means: None,
        mean_rate,
        mean_sd_rate,
    })
}

/// One row per segment and period: ids, count and `P(s=1|Y)`.
pub fn write_state_series_csv<W: Write>(report: &FitReport, data: &PanelData, sink: W) -> Result<()> {
    let series = report
        .state_series
        .as_ref()
        .ok_or_else(|| Error::Spec(format!("{} has no latent states", report.model)))?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["segment_id", "period", "count", "p_normal_count", "category"])?;
    for (n, row) in series.iter().enumerate() {
        let cat = report.segment_categories.as_ref().map(|c| format!("{:?}", c[n])).unwrap_or_default();
        for (t, p) in row.iter().enumerate() {
            w.write_record([
                data.segment_ids()[n].as_str(),
                data.period_ids()[t].as_str(),
                &data.count(n, t).to_string(),
                &format!("{p}"),
                &cat,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Counts of `values` in 20 equal bins on `[0, 1)` plus a bin for exactly 1.
pub fn histogram_bins(values: &[f64]) -> Vec<(f64, f64, usize)> {
    let mut bins: Vec<(f64, f64, usize)> = (0..20).map(|k| (k as f64 / 20.0, (k + 1) as f64 / 20.0, 0)).collect();
    bins.push((1.0, 1.0, 0));
    for &v in values {
        let k = if v >= 1.0 { 20 } else { ((v.max(0.0) * 20.0) as usize).min(19) };
        bins[k].2 += 1;
    }
    bins
}

/// Histograms of the cell state probabilities and, for switching models,
/// of the stationary expectations.
pub fn write_histogram_csv<W: Write>(report: &FitReport, sink: W) -> Result<()> {
    let series = report
        .state_series
        .as_ref()
        .ok_or_else(|| Error::Spec(format!("{} has no latent states", report.model)))?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["quantity", "bin_lower", "bin_upper", "count"])?;
    let cells: Vec<f64> = series.iter().flatten().copied().collect();
    let mut groups = vec![("state_probability", cells)];
    if let Some(st) = &report.stationary_expectations {
        groups.push(("stationary_expectation", st.clone()));
    }
    for (name, values) in groups {
        for (lo, hi, count) in histogram_bins(&values) {
            w.write_record([name, &lo.to_string(), &hi.to_string(), &count.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_integers() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&v, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12 && (hi - 97.525).abs() < 1e-12);
        assert_eq!(credible_interval(&[2.0; 5], 0.9).unwrap(), (2.0, 2.0));
        assert!(credible_interval(&[1.0], 0.9).is_err());
    }

    #[test]
    fn rate_sd_single_cell() {
        let d = PanelData::from_parts(1, 1, vec![0], vec![vec![]], vec![]).unwrap();
        let p = ParamSet::new(vec![4f64.ln()]).with_alpha(0.25);
        let (m, sd) = rate_summaries(&p, &d);
        assert!((m - 4.0).abs() < 1e-12 && (sd - 8f64.sqrt()).abs() < 1e-12);
        let (_, sd0) = rate_summaries(&ParamSet::new(vec![4f64.ln()]), &d);
        assert!((sd0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn categories() {
        assert_eq!(categorize(&[1, 2], &[1.0, 1.0]), SegmentCategory::NormalCount);
        assert_eq!(categorize(&[0, 0], &[0.1, 0.15]), SegmentCategory::LikelyZeroState);
        assert_eq!(categorize(&[0, 0], &[0.5, 0.45]), SegmentCategory::Uncertain);
        assert_eq!(categorize(&[0, 3], &[0.3, 1.0]), SegmentCategory::Mixed);
    }

    #[test]
    fn histogram_edges() {
        let b = histogram_bins(&[0.0, 0.04, 0.05, 0.999, 1.0, 1.0]);
        assert_eq!(b.len(), 21);
        assert_eq!((b[0].2, b[1].2, b[19].2, b[20].2), (2, 1, 1, 2));
    }
}
