//! Model variants and their likelihoods.
//!
//! Eight variants: {negative binomial, Poisson} × {standard, zero-inflated
//! with `q = logistic(τ ln λ)`, zero-inflated with `q = logistic(γ'x)`,
//! two-state Markov switching with a zero state}.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dists::{dot, log_add_exp, log_sigmoid, sigmoid, CountKernel};
use crate::error::{Error, Result};
use crate::markov::{forward, path_log_prior, stationary, TransitionPair};
use crate::panel::{PanelData, StateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    NegativeBinomial,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Standard,
    ZeroInflatedTau,
    ZeroInflatedGamma,
    MarkovSwitching,
}

/// A model variant. `gamma_columns` selects the covariates (by index, 0 is
/// the intercept) entering the zero-state logit of the γ variant; `None`
/// uses all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub structure: Structure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_columns: Option<Vec<usize>>,
}

impl ModelSpec {
    pub const NAMES: [&'static str; 8] = [
        "nb",
        "poisson",
        "zinb-tau",
        "zinb-gamma",
        "zip-tau",
        "zip-gamma",
        "msnb",
        "msp",
    ];

    pub fn new(family: Family, structure: Structure) -> Self {
        Self {
            family,
            structure,
            gamma_columns: None,
        }
    }

    pub fn msnb() -> Self {
        Self::new(Family::NegativeBinomial, Structure::MarkovSwitching)
    }

    pub fn with_gamma_columns(mut self, cols: Vec<usize>) -> Self {
        self.gamma_columns = Some(cols);
        self
    }

    pub fn name(&self) -> &'static str {
        use Family::*;
        use Structure::*;
        match (self.family, self.structure) {
            (NegativeBinomial, Standard) => "nb",
            (Poisson, Standard) => "poisson",
            (NegativeBinomial, ZeroInflatedTau) => "zinb-tau",
            (NegativeBinomial, ZeroInflatedGamma) => "zinb-gamma",
            (Poisson, ZeroInflatedTau) => "zip-tau",
            (Poisson, ZeroInflatedGamma) => "zip-gamma",
            (NegativeBinomial, MarkovSwitching) => "msnb",
            (Poisson, MarkovSwitching) => "msp",
        }
    }

    pub fn is_negbin(&self) -> bool {
        self.family == Family::NegativeBinomial
    }

    pub fn is_switching(&self) -> bool {
        self.structure == Structure::MarkovSwitching
    }

    pub fn is_zero_inflated(&self) -> bool {
        matches!(
            self.structure,
            Structure::ZeroInflatedTau | Structure::ZeroInflatedGamma
        )
    }

    /// Resolved γ covariate indices for `k` covariates.
    pub fn gamma_indices(&self, k: usize) -> Vec<usize> {
        match &self.gamma_columns {
            Some(cols) => cols.clone(),
            None => (0..k).collect(),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Family::*;
        use Structure::*;
        let (family, structure) = match s.to_ascii_lowercase().as_str() {
            "nb" => (NegativeBinomial, Standard),
            "poisson" => (Poisson, Standard),
            "zinb-tau" => (NegativeBinomial, ZeroInflatedTau),
            "zinb-gamma" => (NegativeBinomial, ZeroInflatedGamma),
            "zip-tau" => (Poisson, ZeroInflatedTau),
            "zip-gamma" => (Poisson, ZeroInflatedGamma),
            "msnb" => (NegativeBinomial, MarkovSwitching),
            "msp" => (Poisson, MarkovSwitching),
            other => {
                return Err(Error::Spec(format!(
                    "unknown model '{other}'; valid names: {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        Ok(Self::new(family, structure))
    }
}

/// Parameter values. Fields are present exactly when the variant uses them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<TransitionPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<StateMatrix>,
}

impl ParamSet {
    pub fn new(beta: Vec<f64>) -> Self {
        Self {
            beta,
            log_alpha: None,
            tau: None,
            gamma: None,
            transitions: None,
            states: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.log_alpha = Some(alpha.ln());
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_transitions(mut self, tps: Vec<TransitionPair>) -> Self {
        self.transitions = Some(tps);
        self
    }

    pub fn with_states(mut self, states: StateMatrix) -> Self {
        self.states = Some(states);
        self
    }

    pub fn alpha(&self) -> Option<f64> {
        self.log_alpha.map(f64::exp)
    }

    /// Checks presence and shape of every field against `spec`. Latent
    /// states are not required here.
    pub fn validate(&self, spec: &ModelSpec, n_covariates: usize, n_segments: usize) -> Result<()> {
        let bad = |m: String| Err(Error::ParamDomain(m));
        if self.beta.len() != n_covariates {
            return bad(format!(
                "beta has {} entries, data has {n_covariates} covariates",
                self.beta.len()
            ));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        match (spec.is_negbin(), self.log_alpha) {
            (true, None) => return bad("negative binomial requires log_alpha".into()),
            (true, Some(la)) if la.is_nan() || la == f64::INFINITY => {
                return bad(format!("log_alpha = {la}"))
            }
            (false, Some(_)) => return bad("Poisson models take no dispersion".into()),
            _ => {}
        }
        let wants_tau = spec.structure == Structure::ZeroInflatedTau;
        match (wants_tau, self.tau) {
            (true, None) => return bad("tau required".into()),
            (true, Some(t)) if !t.is_finite() => return bad(format!("tau = {t}")),
            (false, Some(_)) => return bad("tau only applies to the tau variant".into()),
            _ => {}
        }
        let wants_gamma = spec.structure == Structure::ZeroInflatedGamma;
        match (wants_gamma, &self.gamma) {
            (true, None) => return bad("gamma required".into()),
            (true, Some(g)) => {
                let idx = spec.gamma_indices(n_covariates);
                if idx.iter().any(|&i| i >= n_covariates) {
                    return Err(Error::Schema("gamma column index out of range".into()));
                }
                if g.len() != idx.len() {
                    return bad(format!("gamma has {} entries, expected {}", g.len(), idx.len()));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return bad("gamma must be finite".into());
                }
            }
            (false, Some(_)) => return bad("gamma only applies to the gamma variant".into()),
            _ => {}
        }
        match (spec.is_switching(), &self.transitions) {
            (true, None) => return bad("switching models require transitions".into()),
            (true, Some(t)) if t.len() != n_segments => {
                return bad(format!("{} transition pairs for {n_segments} segments", t.len()))
            }
            (false, Some(_)) => return bad("transitions only apply to switching models".into()),
            _ => {}
        }
        if let Some(s) = &self.states {
            if s.n_segments() != n_segments {
                return bad("state matrix has the wrong number of segments".into());
            }
        }
        Ok(())
    }
}

/// Log-likelihood value, with a dedicated marker for a state assignment
/// that contradicts the data (zero state with a positive count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogLik {
    Value(f64),
    Impossible,
}

impl LogLik {
    pub fn value(self) -> f64 {
        match self {
            LogLik::Value(v) => v,
            LogLik::Impossible => f64::NEG_INFINITY,
        }
    }

    pub fn is_impossible(self) -> bool {
        matches!(self, LogLik::Impossible)
    }
}

/// Per-cell mixture weights `(ln w_zero, ln w_count)` for the cell's
/// marginal distribution `w_zero·I(A=0) + w_count·pmf(A)`.
#[inline]
pub(crate) fn cell_log_prob(kernel: &CountKernel, a: u64, eta: f64, lw0: f64, lw1: f64) -> f64 {
    if a == 0 {
        log_add_exp(lw0, lw1 + kernel.log_pmf_zero(eta))
    } else {
        lw1 + kernel.log_pmf(a, eta)
    }
}

/// Precomputed view of a data set under one variant. Used by every fitter.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a PanelData,
    gamma_idx: Vec<usize>,
    max_count: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a PanelData) -> Result<Self> {
        let k = data.n_covariates();
        let gamma_idx = spec.gamma_indices(k);
        if spec.structure == Structure::ZeroInflatedGamma && gamma_idx.iter().any(|&i| i >= k) {
            return Err(Error::Schema("gamma column index out of range".into()));
        }
        let max_count = data.counts().iter().copied().max().unwrap_or(0);
        Ok(Self {
            spec,
            data,
            gamma_idx,
            max_count,
        })
    }

    pub fn kernel(&self, log_alpha: Option<f64>) -> CountKernel {
        match (self.spec.family, log_alpha) {
            (Family::NegativeBinomial, Some(la)) => CountKernel::negbin(la.exp(), self.max_count),
            _ => CountKernel::poisson(),
        }
    }

    pub fn kernel_for(&self, params: &ParamSet) -> CountKernel {
        self.kernel(params.log_alpha)
    }

    /// Linear predictors `β'x` for all cells, segment-major.
    pub fn etas(&self, beta: &[f64]) -> Vec<f64> {
        let d = self.data;
        (0..d.n_cells()).map(|c| dot(beta, d.x_cell(c))).collect()
    }

    /// Zero-state logit of a cell for the zero-inflated variants.
    #[inline]
    pub fn zero_logit(&self, params: &ParamSet, cell: usize, eta: f64) -> f64 {
        match self.spec.structure {
            Structure::ZeroInflatedTau => params.tau.unwrap_or(0.0) * eta,
            Structure::ZeroInflatedGamma => {
                let x = self.data.x_cell(cell);
                let g = params.gamma.as_deref().unwrap_or(&[]);
                self.gamma_idx.iter().zip(g).map(|(&i, gi)| gi * x[i]).sum()
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Marginal mixture weights of every cell. Switching models use the
    /// stationary distribution of the segment's chain.
    pub fn cell_weights(&self, params: &ParamSet, etas: &[f64]) -> Vec<(f64, f64)> {
        let d = self.data;
        let t_len = d.n_periods();
        (0..d.n_cells())
            .map(|c| match self.spec.structure {
                Structure::Standard => (f64::NEG_INFINITY, 0.0),
                Structure::ZeroInflatedTau | Structure::ZeroInflatedGamma => {
                    let z = self.zero_logit(params, c, etas[c]);
                    (log_sigmoid(z), log_sigmoid(-z))
                }
                Structure::MarkovSwitching => {
                    let tp = &params.transitions.as_ref().expect("validated")[c / t_len];
                    let st = stationary(tp);
                    (st.pbar0.ln(), st.pbar1.ln())
                }
            })
            .collect()
    }

    /// State-integrated log-likelihood. Parameters must already be validated.
    pub fn integrated(&self, params: &ParamSet) -> f64 {
        let kernel = self.kernel_for(params);
        let etas = self.etas(&params.beta);
        self.integrated_with(params, &kernel, &etas)
    }

    pub fn integrated_with(&self, params: &ParamSet, kernel: &CountKernel, etas: &[f64]) -> f64 {
        let d = self.data;
        let counts = d.counts();
        match self.spec.structure {
            Structure::Standard => counts
                .iter()
                .zip(etas)
                .map(|(&a, &eta)| kernel.log_pmf(a, eta))
                .sum(),
            Structure::ZeroInflatedTau | Structure::ZeroInflatedGamma => counts
                .iter()
                .zip(etas)
                .enumerate()
                .map(|(c, (&a, &eta))| {
                    let z = self.zero_logit(params, c, eta);
                    cell_log_prob(kernel, a, eta, log_sigmoid(z), log_sigmoid(-z))
                })
                .sum(),
            Structure::MarkovSwitching => {
                let tps = params.transitions.as_ref().expect("validated");
                let t_len = d.n_periods();
                let mut le1 = vec![0.0; t_len];
                let mut total = 0.0;
                for (n, tp) in tps.iter().enumerate() {
                    let seg = d.segment_counts(n);
                    let seg_eta = &etas[n * t_len..(n + 1) * t_len];
                    for t in 0..t_len {
                        le1[t] = kernel.log_pmf(seg[t], seg_eta[t]);
                    }
                    total += forward(seg, &le1, tp).loglik;
                }
                total
            }
        }
    }

    /// Complete-data log-likelihood given per-cell states.
    pub fn complete_with(&self, states: &[u8], kernel: &CountKernel, etas: &[f64]) -> LogLik {
        let mut total = 0.0;
        for ((&a, &s), &eta) in self.data.counts().iter().zip(states).zip(etas) {
            if s == 0 {
                if a > 0 {
                    return LogLik::Impossible;
                }
            } else {
                total += kernel.log_pmf(a, eta);
            }
        }
        LogLik::Value(total)
    }
}

fn check(spec: &ModelSpec, params: &ParamSet, data: &PanelData) -> Result<()> {
    params.validate(spec, data.n_covariates(), data.n_segments())
}

/// Log-likelihood with the latent states given. Non-switching variants
/// without a state matrix are evaluated with every cell in the count state.
pub fn loglik_complete(spec: &ModelSpec, params: &ParamSet, data: &PanelData) -> Result<LogLik> {
    check(spec, params, data)?;
    let eval = Evaluator::new(spec, data)?;
    let kernel = eval.kernel_for(params);
    let etas = eval.etas(&params.beta);
    match &params.states {
        Some(s) => Ok(eval.complete_with(s.as_slice(), &kernel, &etas)),
        None if spec.is_switching() => Err(Error::ParamDomain(
            "complete-data likelihood of a switching model needs a state matrix".into(),
        )),
        None => {
            let ones = vec![1u8; data.n_cells()];
            Ok(eval.complete_with(&ones, &kernel, &etas))
        }
    }
}

/// Log-likelihood with the latent states summed out.
pub fn loglik_integrated(spec: &ModelSpec, params: &ParamSet, data: &PanelData) -> Result<f64> {
    check(spec, params, data)?;
    let eval = Evaluator::new(spec, data)?;
    Ok(eval.integrated(params))
}

/// `ln P(S)` of a state matrix under the per-segment chains.
pub fn log_state_prior(params: &ParamSet, states: &StateMatrix) -> Result<f64> {
    let tps = params
        .transitions
        .as_ref()
        .ok_or_else(|| Error::ParamDomain("state prior needs transitions".into()))?;
    if tps.len() != states.n_segments() {
        return Err(Error::ParamDomain("transition count does not match states".into()));
    }
    Ok(tps
        .iter()
        .enumerate()
        .map(|(n, tp)| path_log_prior(states.segment(n), tp))
        .sum())
}

/// Zero-state probability `q` of a covariate vector under a zero-inflated
/// variant.
pub fn zero_state_prob(spec: &ModelSpec, params: &ParamSet, x: &[f64]) -> Result<f64> {
    match spec.structure {
        Structure::ZeroInflatedTau => {
            let tau = params
                .tau
                .ok_or_else(|| Error::ParamDomain("tau required".into()))?;
            let eta = crate::dists::linear_predictor(&params.beta, x)?;
            Ok(sigmoid(tau * eta))
        }
        Structure::ZeroInflatedGamma => {
            let gamma = params
                .gamma
                .as_ref()
                .ok_or_else(|| Error::ParamDomain("gamma required".into()))?;
            let idx = spec.gamma_indices(x.len());
            if idx.len() != gamma.len() || idx.iter().any(|&i| i >= x.len()) {
                return Err(Error::Schema("gamma does not match the covariate vector".into()));
            }
            let z: f64 = idx.iter().zip(gamma).map(|(&i, g)| g * x[i]).sum();
            Ok(sigmoid(z))
        }
        _ => Err(Error::Spec(format!(
            "zero-state probability is defined for zero-inflated models, not {}",
            spec.name()
        ))),
    }
}

/// Names and packing of the continuous parameters (`β`, `ln α`, `τ`, `γ`).
/// Transition probabilities and states are handled separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub n_beta: usize,
    pub has_log_alpha: bool,
    pub has_tau: bool,
    pub n_gamma: usize,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec, variable_names: &[String]) -> Self {
        let k = variable_names.len();
        let mut names: Vec<String> = variable_names.iter().map(|v| format!("beta:{v}")).collect();
        let has_log_alpha = spec.is_negbin();
        if has_log_alpha {
            names.push("log_alpha".into());
        }
        let has_tau = spec.structure == Structure::ZeroInflatedTau;
        if has_tau {
            names.push("tau".into());
        }
        let mut n_gamma = 0;
        if spec.structure == Structure::ZeroInflatedGamma {
            for i in spec.gamma_indices(k) {
                let v = variable_names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
                names.push(format!("gamma:{v}"));
                n_gamma += 1;
            }
        }
        Self {
            names,
            n_beta: k,
            has_log_alpha,
            has_tau,
            n_gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn log_alpha_index(&self) -> Option<usize> {
        self.has_log_alpha.then_some(self.n_beta)
    }

    pub fn tau_index(&self) -> Option<usize> {
        self.has_tau.then_some(self.n_beta + usize::from(self.has_log_alpha))
    }

    pub fn gamma_range(&self) -> std::ops::Range<usize> {
        let start = self.n_beta + usize::from(self.has_log_alpha) + usize::from(self.has_tau);
        start..start + self.n_gamma
    }

    pub fn pack(&self, p: &ParamSet) -> Vec<f64> {
        let mut v = p.beta.clone();
        if self.has_log_alpha {
            v.push(p.log_alpha.unwrap_or(0.0));
        }
        if self.has_tau {
            v.push(p.tau.unwrap_or(0.0));
        }
        if self.n_gamma > 0 {
            v.extend(p.gamma.clone().unwrap_or_else(|| vec![0.0; self.n_gamma]));
        }
        v
    }

    /// Writes a packed vector into `out`, leaving transitions and states
    /// untouched.
    pub fn unpack_into(&self, v: &[f64], out: &mut ParamSet) {
        out.beta.clear();
        out.beta.extend_from_slice(&v[..self.n_beta]);
        out.log_alpha = self.log_alpha_index().map(|i| v[i]);
        out.tau = self.tau_index().map(|i| v[i]);
        out.gamma = (self.n_gamma > 0).then(|| v[self.gamma_range()].to_vec());
    }

    pub fn unpack(&self, v: &[f64]) -> ParamSet {
        let mut p = ParamSet::new(Vec::new());
        self.unpack_into(v, &mut p);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelData;

    fn tiny() -> PanelData {
        // 2 segments x 2 periods, one covariate.
        PanelData::from_parts(
            2,
            2,
            vec![0, 1, 2, 0],
            vec![vec![0.5], vec![-0.2], vec![1.0], vec![0.0]],
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn names_round_trip() {
        for name in ModelSpec::NAMES {
            assert_eq!(name.parse::<ModelSpec>().unwrap().name(), name);
        }
        let err = "zinb".parse::<ModelSpec>().unwrap_err().to_string();
        assert!(err.contains("msnb") && err.contains("zip-gamma"));
    }

    #[test]
    fn complete_all_ones_is_standard() {
        let data = tiny();
        let ms = ModelSpec::msnb();
        let nb = ModelSpec::new(Family::NegativeBinomial, Structure::Standard);
        let base = ParamSet::new(vec![0.3, -0.4]).with_alpha(0.5);
        let std_ll = loglik_integrated(&nb, &base, &data).unwrap();
        let tp = TransitionPair::new(0.4, 0.3).unwrap();
        let p = base
            .clone()
            .with_transitions(vec![tp; 2])
            .with_states(StateMatrix::filled(2, 2, 1));
        let c = loglik_complete(&ms, &p, &data).unwrap().value();
        assert!((c - std_ll).abs() < 1e-12);
    }

    #[test]
    fn contradiction_is_flagged() {
        let data = tiny();
        let ms = ModelSpec::msnb();
        let tp = TransitionPair::new(0.4, 0.3).unwrap();
        let mut s = StateMatrix::filled(2, 2, 1);
        s.set(1, 0, 0); // segment 1, period 0 has count 2
        let p = ParamSet::new(vec![0.3, -0.4])
            .with_alpha(0.5)
            .with_transitions(vec![tp; 2])
            .with_states(s);
        assert!(loglik_complete(&ms, &p, &data).unwrap().is_impossible());
    }

    #[test]
    fn zero_state_prob_cases() {
        let tau = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedTau);
        let p = ParamSet::new(vec![0.0, 0.0]).with_alpha(1.0).with_tau(-1.73);
        assert!((zero_state_prob(&tau, &p, &[1.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        let gam = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedGamma);
        let p = ParamSet::new(vec![0.0, 0.0]).with_alpha(1.0).with_gamma(vec![1.0, -0.5]);
        assert!((zero_state_prob(&gam, &p, &[1.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        let p = ParamSet::new(vec![0.0, 0.0]).with_alpha(1.0).with_gamma(vec![800.0, 0.0]);
        assert_eq!(zero_state_prob(&gam, &p, &[1.0, 2.0]).unwrap(), 1.0);
        let nb = ModelSpec::new(Family::NegativeBinomial, Structure::Standard);
        assert!(matches!(
            zero_state_prob(&nb, &p, &[1.0, 2.0]),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn zi_tau_cell_at_unit_rate() {
        let data = PanelData::from_parts(1, 1, vec![0], vec![vec![]], vec![]).unwrap();
        let spec = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedTau);
        let p = ParamSet::new(vec![0.0]).with_alpha(1.0).with_tau(2.0);
        let ll = loglik_integrated(&spec, &p, &data).unwrap();
        assert!((ll - (0.5 + 0.5 * 0.5f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn zi_degenerates_to_standard() {
        let data = tiny();
        let gam = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedGamma);
        let nb = ModelSpec::new(Family::NegativeBinomial, Structure::Standard);
        let base = ParamSet::new(vec![0.3, -0.4]).with_alpha(0.5);
        let zi = base.clone().with_gamma(vec![-60.0, 0.0]);
        let a = loglik_integrated(&gam, &zi, &data).unwrap();
        let b = loglik_integrated(&nb, &base, &data).unwrap();
        assert!((a - b).abs() < 1e-20f64.max(1e-12));
    }

    #[test]
    fn validation_rejects_mismatches() {
        let data = tiny();
        let nb = ModelSpec::new(Family::NegativeBinomial, Structure::Standard);
        assert!(loglik_integrated(&nb, &ParamSet::new(vec![0.0, 0.0]), &data).is_err());
        assert!(loglik_integrated(&nb, &ParamSet::new(vec![0.0]).with_alpha(1.0), &data).is_err());
        let ms = ModelSpec::msnb();
        let p = ParamSet::new(vec![0.0, 0.0]).with_alpha(1.0);
        assert!(loglik_integrated(&ms, &p, &data).is_err());
    }

    #[test]
    fn layout_packs_in_order() {
        let names = vec!["intercept".to_string(), "x".to_string()];
        let spec = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedGamma)
            .with_gamma_columns(vec![0]);
        let lay = ParamLayout::new(&spec, &names);
        assert_eq!(lay.names, ["beta:intercept", "beta:x", "log_alpha", "gamma:intercept"]);
        let p = ParamSet::new(vec![1.0, 2.0]).with_alpha(1.0).with_gamma(vec![3.0]);
        let v = lay.pack(&p);
        assert_eq!(v, vec![1.0, 2.0, 0.0, 3.0]);
        assert_eq!(lay.unpack(&v), p);
    }
}
