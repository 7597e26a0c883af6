//! Maximum-likelihood fitting of the non-switching variants.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Evaluator, ModelSpec, ParamLayout, ParamSet, Structure};
use crate::optim::{hessian, maximize, OptimOptions};
use crate::panel::PanelData;
use crate::stats::two_sided_z;

/// Smallest eigenvalue of the correlation-scaled observed information below
/// which the Hessian is treated as singular.
const SINGULAR_EIGEN_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleResult {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub estimates: ParamSet,
    /// Packed estimate vector in `names` order.
    pub estimate_vector: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub max_loglik: f64,
    pub init_loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub hessian_singular: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_inf_norm: f64,
}

impl MleResult {
    /// Number of free continuous parameters.
    pub fn n_params(&self) -> usize {
        self.estimate_vector.len()
    }
}

/// `AIC = 2K − 2·LL`.
pub fn aic(n_params: usize, loglik: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * loglik
}

/// Poisson log-linear fit by Newton iterations on the score equations
/// `Σ (A − λ) x = 0`. Falls back to an intercept-only rate when the design
/// is singular.
pub fn poisson_moment_fit(data: &PanelData) -> Vec<f64> {
    let k = data.n_covariates();
    let n = data.n_cells();
    let mean = data.counts().iter().sum::<u64>() as f64 / n as f64;
    let mut beta = vec![0.0; k];
    beta[0] = (mean + 0.1).ln();
    let fallback = beta.clone();
    for _ in 0..50 {
        let mut grad = DVector::<f64>::zeros(k);
        let mut info = DMatrix::<f64>::zeros(k, k);
        for c in 0..n {
            let x = data.x_cell(c);
            let eta: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
            let mu = eta.clamp(-30.0, 30.0).exp();
            let r = data.counts()[c] as f64 - mu;
            for i in 0..k {
                grad[i] += r * x[i];
                for j in 0..=i {
                    info[(i, j)] += mu * x[i] * x[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                info[(j, i)] = info[(i, j)];
            }
        }
        let Some(chol) = info.cholesky() else {
            return fallback;
        };
        let step = chol.solve(&grad);
        let mut max_step: f64 = 0.0;
        for i in 0..k {
            let s = step[i].clamp(-5.0, 5.0);
            beta[i] += s;
            max_step = max_step.max(s.abs());
        }
        if !beta.iter().all(|b| b.is_finite()) {
            return fallback;
        }
        if max_step < 1e-10 {
            break;
        }
    }
    beta
}

/// Neutral starting values: Poisson moment-fit β, `ln α = ln 0.5`, `τ = −1`,
/// `γ = 0`.
pub fn default_init(spec: &ModelSpec, data: &PanelData) -> ParamSet {
    let mut p = ParamSet::new(poisson_moment_fit(data));
    if spec.is_negbin() {
        p.log_alpha = Some(0.5f64.ln());
    }
    match spec.structure {
        Structure::ZeroInflatedTau => p.tau = Some(-1.0),
        Structure::ZeroInflatedGamma => {
            p.gamma = Some(vec![0.0; spec.gamma_indices(data.n_covariates()).len()])
        }
        _ => {}
    }
    p
}

/// Standard errors from the inverse observed information, or `None` when
/// it is not positive definite.
pub(crate) fn std_errors_from_hessian(h: &[f64], n: usize) -> Option<Vec<f64>> {
    let info = DMatrix::from_row_slice(n, n, h).map(|v| -v);
    let diag: Vec<f64> = (0..n).map(|i| info[(i, i)]).collect();
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| info[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = scaled.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eig > SINGULAR_EIGEN_RATIO) {
        return None;
    }
    let inv = scaled.try_inverse()?;
    let se: Vec<f64> = (0..n).map(|i| (inv[(i, i)] / diag[i]).sqrt()).collect();
    se.iter().all(|s| s.is_finite() && *s > 0.0).then_some(se)
}

/// Maximizes the state-integrated likelihood of a non-switching variant.
pub fn fit_mle(
    spec: &ModelSpec,
    data: &PanelData,
    init: Option<&ParamSet>,
    opts: &OptimOptions,
) -> Result<MleResult> {
    if spec.is_switching() {
        return Err(Error::Spec(format!(
            "maximum likelihood is not supported for the switching model {}; use MCMC",
            spec.name()
        )));
    }
    let eval = Evaluator::new(spec, data)?;
    let layout = ParamLayout::new(spec, data.variable_names());
    let init = match init {
        Some(p) => p.clone(),
        None => default_init(spec, data),
    };
    init.validate(spec, data.n_covariates(), data.n_segments())?;
    let x0 = layout.pack(&init);
    let objective = |v: &[f64]| {
        let p = layout.unpack(v);
        eval.integrated(&p)
    };
    let init_ll = objective(&x0);
    if !init_ll.is_finite() {
        return Err(Error::Init(format!("{} at the starting values", init_ll)));
    }

    let mut best = maximize(objective, &x0, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..opts.multistart {
        let start: Vec<f64> = x0.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        if !objective(&start).is_finite() {
            continue;
        }
        let r = maximize(objective, &start, opts);
        if r.value > best.value {
            best = r;
        }
    }
    let (x, ll) = if best.value >= init_ll {
        (best.x.clone(), best.value)
    } else {
        (x0.clone(), init_ll)
    };

    let h = hessian(objective, &x);
    let std_errors = std_errors_from_hessian(&h, x.len());
    let estimates = layout.unpack(&x);
    Ok(MleResult {
        spec: spec.clone(),
        names: layout.names.clone(),
        estimates,
        hessian_singular: std_errors.is_none(),
        std_errors,
        max_loglik: ll,
        init_loglik: init_ll,
        aic: aic(x.len(), ll),
        converged: best.converged,
        iterations: best.iterations,
        evaluations: best.evaluations,
        grad_inf_norm: best.grad_inf_norm,
        estimate_vector: x,
    })
}

/// Two-tailed z-test of each parameter against zero at `level`.
pub fn t_test(result: &MleResult, level: f64) -> Result<Vec<bool>> {
    let se = result.std_errors.as_ref().ok_or(Error::DiagnosticsUnavailable)?;
    let z = two_sided_z(level);
    Ok(result
        .estimate_vector
        .iter()
        .zip(se)
        .map(|(e, s)| (e / s).abs() > z)
        .collect())
}

/// Symmetric Wald interval `estimate ± z·se`.
pub fn confidence_interval(result: &MleResult, level: f64) -> Result<Vec<(f64, f64)>> {
    let se = result.std_errors.as_ref().ok_or(Error::DiagnosticsUnavailable)?;
    Ok(wald_intervals(&result.estimate_vector, se, level))
}

pub fn wald_intervals(estimates: &[f64], se: &[f64], level: f64) -> Vec<(f64, f64)> {
    let z = two_sided_z(1.0 - level);
    estimates
        .iter()
        .zip(se)
        .map(|(e, s)| {
            if *s == 0.0 {
                log::warn!("zero standard error gives a zero-width interval at {e}");
            }
            (e - z * s, e + z * s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;

    fn result_with(est: Vec<f64>, se: Vec<f64>) -> MleResult {
        MleResult {
            spec: ModelSpec::new(Family::Poisson, Structure::Standard),
            names: (0..est.len()).map(|i| format!("p{i}")).collect(),
            estimates: ParamSet::new(est.clone()),
            estimate_vector: est,
            std_errors: Some(se),
            max_loglik: 0.0,
            init_loglik: 0.0,
            aic: 0.0,
            converged: true,
            hessian_singular: false,
            iterations: 0,
            evaluations: 0,
            grad_inf_norm: 0.0,
        }
    }

    #[test]
    fn aic_of_reported_fit() {
        assert!((aic(16, -2502.67) - 5037.34).abs() < 1e-9);
    }

    #[test]
    fn significance_thresholds() {
        let r = result_with(vec![0.0, 3.0, 1.9601, 1.9599], vec![1.0; 4]);
        assert_eq!(t_test(&r, 0.05).unwrap(), vec![false, true, true, false]);
    }

    #[test]
    fn interval_widths() {
        let r = result_with(vec![0.0, 2.0], vec![1.0, 0.0]);
        let ci = confidence_interval(&r, 0.95).unwrap();
        assert!((ci[0].0 + 1.959964).abs() < 1e-6 && (ci[0].1 - 1.959964).abs() < 1e-6);
        assert_eq!(ci[1], (2.0, 2.0));
        let ci60 = confidence_interval(&r, 0.60).unwrap();
        assert!((ci60[0].1 - 0.8416212335729143).abs() < 1e-9);
    }

    #[test]
    fn missing_errors() {
        let mut r = result_with(vec![1.0], vec![1.0]);
        r.std_errors = None;
        assert!(matches!(t_test(&r, 0.05), Err(Error::DiagnosticsUnavailable)));
        assert!(matches!(confidence_interval(&r, 0.95), Err(Error::DiagnosticsUnavailable)));
    }

    #[test]
    fn switching_rejected() {
        let d = PanelData::from_parts(1, 2, vec![0, 1], vec![vec![], vec![]], vec![]).unwrap();
        let r = fit_mle(&ModelSpec::msnb(), &d, None, &OptimOptions::default());
        assert!(matches!(r, Err(Error::Spec(_))));
    }
}
