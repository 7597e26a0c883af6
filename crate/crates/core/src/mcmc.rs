//! Posterior sampling for every model variant.
//!
//! One sweep of a chain:
//!
//! 1. random-walk Metropolis on each continuous scalar (`β_k`, `ln α`, `τ`,
//!    `γ_k`) against the state-integrated likelihood, or for switching
//!    models the complete-data likelihood given the current states;
//! 2. switching models only: every segment's state path is redrawn exactly
//!    by forward filtering, backward sampling;
//! 3. switching models only: each segment's `(p01, p10)` is proposed from
//!    the conjugate Beta update given the path's transition counts and
//!    accepted with probability `min(1, p̄_{s1}(new) / p̄_{s1}(old))`,
//!    which accounts for the stationary initial state.
//!
//! Proposal scales adapt during burn-in only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::CountKernel;
use crate::error::{Error, Result};
use crate::markov::{backward_sample, forward, stationary, transition_counts, TransitionPair};
use crate::mle::fit_mle;
use crate::model::{Evaluator, LogLik, ModelSpec, ParamLayout, ParamSet, Structure};
use crate::optim::OptimOptions;
use crate::panel::PanelData;

/// Lower bound on any proposal scale.
pub const SCALE_FLOOR: f64 = 1e-8;
const SCALE_CEILING: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    /// Sd of the independent zero-mean normal priors on `β`.
    pub beta_sd: f64,
    /// Bounds of the uniform prior on `ln α`.
    pub log_alpha_min: f64,
    pub log_alpha_max: f64,
    pub tau_sd: f64,
    pub gamma_sd: f64,
    /// `Beta(a, b)` prior on each transition probability.
    pub transition_a: f64,
    pub transition_b: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta_sd: 100.0,
            log_alpha_min: -20.0,
            log_alpha_max: 5.0,
            tau_sd: 100.0,
            gamma_sd: 100.0,
            transition_a: 1.0,
            transition_b: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.beta_sd, self.tau_sd, self.gamma_sd, self.transition_a, self.transition_b];
        if widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("prior widths and Beta hyperparameters must be positive".into()));
        }
        if !(self.log_alpha_min < self.log_alpha_max) {
            return Err(Error::Config("log-alpha prior range is empty".into()));
        }
        Ok(())
    }

    fn log_density(&self, layout: &ParamLayout, theta: &[f64]) -> f64 {
        let normal = |v: f64, sd: f64| -0.5 * (v / sd).powi(2);
        let mut lp: f64 = theta[..layout.n_beta].iter().map(|&b| normal(b, self.beta_sd)).sum();
        if let Some(i) = layout.log_alpha_index() {
            if !(self.log_alpha_min..=self.log_alpha_max).contains(&theta[i]) {
                return f64::NEG_INFINITY;
            }
        }
        if let Some(i) = layout.tau_index() {
            lp += normal(theta[i], self.tau_sd);
        }
        lp += theta[layout.gamma_range()].iter().map(|&g| normal(g, self.gamma_sd)).sum::<f64>();
        lp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateStorage {
    /// Per-cell count of retained draws in the normal-count state.
    #[default]
    Freq,
    /// Additionally keep every retained state matrix as a packed bitset.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_chains: usize,
    /// Total sweeps per chain, burn-in included.
    pub n_draws: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Sweeps between proposal-scale updates during burn-in.
    pub adapt_window: usize,
    pub target_accept: f64,
    pub store_states: StateStorage,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_draws: 20_000,
            n_burnin: 5_000,
            thin: 5,
            seed: 1,
            adapt_window: 50,
            target_accept: 0.3,
            store_states: StateStorage::Freq,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_chains < 2 {
            return bad("at least two chains are required");
        }
        if self.n_draws <= self.n_burnin {
            return bad("n_draws must exceed n_burnin");
        }
        if self.thin == 0 || !(self.n_draws - self.n_burnin).is_multiple_of(self.thin) {
            return bad("thin must divide n_draws - n_burnin");
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_draws - self.n_burnin) / self.thin
    }
}

/// Retained output of one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chain {
    /// Continuous parameters per retained draw, in `ChainDraws::names` order.
    pub draws: Vec<Vec<f64>>,
    /// State-integrated log-likelihood per retained draw.
    pub loglik: Vec<f64>,
    /// Per retained draw, `(p01, p10)` of every segment (switching models).
    pub transitions: Vec<Vec<(f64, f64)>>,
    /// Per cell, retained draws with the normal-count state (switching models).
    pub state_freq: Vec<u32>,
    /// Packed state matrices, one bitset per retained draw, when requested.
    pub states_full: Option<Vec<Vec<u64>>>,
    pub accept_rate: Vec<f64>,
    pub transition_accept_rate: f64,
    pub final_scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDraws {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub n_segments: usize,
    pub n_periods: usize,
    pub config: McmcConfig,
    pub priors: PriorConfig,
    pub chains: Vec<Chain>,
}

impl ChainDraws {
    pub fn retained_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.loglik.len())
    }

    pub fn total_retained(&self) -> usize {
        self.chains.iter().map(|c| c.loglik.len()).sum()
    }

    /// Pooled per-draw log-likelihoods.
    pub fn pooled_loglik(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.loglik.iter().copied()).collect()
    }

    /// Pooled draws of continuous parameter `j`.
    pub fn pooled_param(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.draws.iter().map(move |d| d[j])).collect()
    }

    /// Posterior means of the continuous parameters in sampling scale.
    pub fn posterior_mean_vector(&self) -> Vec<f64> {
        let p = self.names.len();
        let n = self.total_retained() as f64;
        let mut m = vec![0.0; p];
        for c in &self.chains {
            for d in &c.draws {
                for (acc, v) in m.iter_mut().zip(d) {
                    *acc += v / n;
                }
            }
        }
        m
    }

    /// Posterior-mean point estimate: means of `β`, `α` (returned as
    /// `ln E[α]`), `τ`, `γ` and of each transition probability.
    pub fn posterior_mean_params(&self) -> ParamSet {
        let layout = ParamLayout::new(&self.spec, &self.names_as_variables());
        let mut v = self.posterior_mean_vector();
        if let Some(i) = layout.log_alpha_index() {
            let alphas: Vec<f64> = self.pooled_param(i).iter().map(|la| la.exp()).collect();
            v[i] = crate::stats::mean(&alphas).ln();
        }
        let mut p = layout.unpack(&v);
        if self.spec.is_switching() {
            p.transitions = Some(self.transition_means());
        }
        p
    }

    fn names_as_variables(&self) -> Vec<String> {
        self.names
            .iter()
            .filter_map(|n| n.strip_prefix("beta:").map(str::to_string))
            .collect()
    }

    /// Posterior mean `(p01, p10)` per segment.
    pub fn transition_means(&self) -> Vec<TransitionPair> {
        let n = self.total_retained() as f64;
        (0..self.n_segments)
            .map(|s| {
                let (mut a, mut b) = (0.0, 0.0);
                for c in &self.chains {
                    for d in &c.transitions {
                        a += d[s].0;
                        b += d[s].1;
                    }
                }
                TransitionPair::new(a / n, b / n).expect("means of interior draws are interior")
            })
            .collect()
    }

    /// `E[p̄₁ | Y]` per segment.
    pub fn stationary_expectations(&self) -> Vec<f64> {
        let n = self.total_retained() as f64;
        (0..self.n_segments)
            .map(|s| {
                self.chains
                    .iter()
                    .flat_map(|c| c.transitions.iter())
                    .map(|d| d[s].0 / (d[s].0 + d[s].1))
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    /// Per-chain matrices (draws × parameters) of every continuous quantity
    /// used for convergence checks: sampled parameters, then each segment's
    /// `p01` and `p10`.
    pub fn diagnostic_matrices(&self) -> (Vec<String>, Vec<Vec<Vec<f64>>>) {
        let mut names = self.names.clone();
        if self.spec.is_switching() {
            names.extend((0..self.n_segments).map(|s| format!("p01[{s}]")));
            names.extend((0..self.n_segments).map(|s| format!("p10[{s}]")));
        }
        let chains = self
            .chains
            .iter()
            .map(|c| {
                c.draws
                    .iter()
                    .enumerate()
                    .map(|(i, d)| {
                        let mut row = d.clone();
                        if let Some(tr) = c.transitions.get(i) {
                            row.extend(tr.iter().map(|t| t.0));
                            row.extend(tr.iter().map(|t| t.1));
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        (names, chains)
    }
}

/// `P(s_{t,n} = 1 | Y)`, segment-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProbabilities {
    pub n_segments: usize,
    pub n_periods: usize,
    pub probs: Vec<f64>,
}

impl StateProbabilities {
    pub fn get(&self, n: usize, t: usize) -> f64 {
        self.probs[n * self.n_periods + t]
    }

    pub fn segment(&self, n: usize) -> &[f64] {
        &self.probs[n * self.n_periods..(n + 1) * self.n_periods]
    }
}

/// Pools the state-frequency accumulators of all chains.
pub fn state_posterior(draws: &ChainDraws) -> Result<StateProbabilities> {
    if !draws.spec.is_switching() {
        return Err(Error::Spec(format!("{} has no latent state chain", draws.spec.name())));
    }
    let total = draws.total_retained();
    if total == 0 {
        return Err(Error::Data("no retained draws".into()));
    }
    let cells = draws.n_segments * draws.n_periods;
    let mut freq = vec![0u64; cells];
    for c in &draws.chains {
        for (f, v) in freq.iter_mut().zip(&c.state_freq) {
            *f += u64::from(*v);
        }
    }
    Ok(StateProbabilities {
        n_segments: draws.n_segments,
        n_periods: draws.n_periods,
        probs: freq.into_iter().map(|f| f as f64 / total as f64).collect(),
    })
}

/// One adaptation step: `scale · exp(κ (rate − target))` with
/// `κ = min(1, 10 / step)`, floored at [`SCALE_FLOOR`].
pub fn adapt_scale(scale: f64, accept_rate: f64, target: f64, step: usize) -> f64 {
    let kappa = (10.0 / step.max(1) as f64).min(1.0);
    (scale * (kappa * (accept_rate - target)).exp()).clamp(SCALE_FLOOR, SCALE_CEILING)
}

/// Applies [`adapt_scale`] to every block given acceptance counts over a
/// window of `window` proposals.
pub fn adapt_proposals(scales: &mut [f64], accepted: &[usize], window: usize, target: f64, step: usize) {
    for (s, &a) in scales.iter_mut().zip(accepted) {
        *s = adapt_scale(*s, a as f64 / window as f64, target, step);
    }
}

/// Conjugate Beta proposal for a segment's transitions given its path.
pub fn draw_transition_conjugate<R: Rng + ?Sized>(
    states: &[u8],
    priors: &PriorConfig,
    rng: &mut R,
) -> Option<(f64, f64)> {
    let [n00, n01, n10, n11] = transition_counts(states);
    let (a, b) = (priors.transition_a, priors.transition_b);
    let p01 = Beta::new(a + f64::from(n01), b + f64::from(n00)).ok()?.sample(rng);
    let p10 = Beta::new(a + f64::from(n10), b + f64::from(n11)).ok()?.sample(rng);
    Some((p01, p10))
}

/// Exact conditional update of one segment's transitions: conjugate Beta
/// proposal corrected for the stationary initial-state probability.
pub fn update_transitions<R: Rng + ?Sized>(
    current: TransitionPair,
    states: &[u8],
    priors: &PriorConfig,
    rng: &mut R,
) -> (TransitionPair, bool) {
    let Some((p01, p10)) = draw_transition_conjugate(states, priors, rng) else {
        return (current, false);
    };
    let Ok(prop) = TransitionPair::new(p01, p10) else {
        return (current, false);
    };
    let s1 = states[0];
    let log_ratio = stationary(&prop).log_prob(s1) - stationary(&current).log_prob(s1);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        (prop, true)
    } else {
        (current, false)
    }
}

struct ChainState {
    theta: Vec<f64>,
    etas: Vec<f64>,
    kernel: CountKernel,
    transitions: Vec<TransitionPair>,
    states: Vec<u8>,
    /// Likelihood part of the current target (integrated, or complete-data
    /// for switching models).
    loglik: f64,
}

struct Sampler<'a> {
    eval: Evaluator<'a>,
    layout: ParamLayout,
    priors: &'a PriorConfig,
    scratch: ParamSet,
}

impl<'a> Sampler<'a> {
    fn params_view(&mut self, theta: &[f64]) -> &ParamSet {
        self.layout.unpack_into(theta, &mut self.scratch);
        &self.scratch
    }

    fn target_loglik(&mut self, theta: &[f64], etas: &[f64], kernel: &CountKernel, states: &[u8]) -> f64 {
        if self.eval.spec.is_switching() {
            match self.eval.complete_with(states, kernel, etas) {
                LogLik::Value(v) => v,
                LogLik::Impossible => f64::NEG_INFINITY,
            }
        } else {
            self.layout.unpack_into(theta, &mut self.scratch);
            self.eval.integrated_with(&self.scratch, kernel, etas)
        }
    }

    fn integrated_now(&mut self, st: &ChainState) -> f64 {
        if self.eval.spec.is_switching() {
            let mut p = self.params_view(&st.theta).clone();
            p.transitions = Some(st.transitions.clone());
            self.eval.integrated_with(&p, &st.kernel, &st.etas)
        } else {
            st.loglik
        }
    }

    fn metropolis_sweep<R: Rng>(&mut self, st: &mut ChainState, scales: &[f64], accepted: &mut [usize], rng: &mut R) {
        let data = self.eval.data;
        let k = self.layout.n_beta;
        let mut prop_etas = st.etas.clone();
        for i in 0..st.theta.len() {
            let delta = scales[i] * rng.sample::<f64, _>(StandardNormal);
            let mut prop = st.theta.clone();
            prop[i] += delta;
            let lp_prop = self.priors.log_density(&self.layout, &prop);
            if lp_prop == f64::NEG_INFINITY {
                continue;
            }
            let lp_cur = self.priors.log_density(&self.layout, &st.theta);
            let (ll, new_kernel) = if i < k {
                for (c, e) in prop_etas.iter_mut().enumerate() {
                    *e = st.etas[c] + delta * data.x_cell(c)[i];
                }
                (self.target_loglik(&prop, &prop_etas, &st.kernel, &st.states), None)
            } else if Some(i) == self.layout.log_alpha_index() {
                let kern = self.eval.kernel(Some(prop[i]));
                (self.target_loglik(&prop, &st.etas, &kern, &st.states), Some(kern))
            } else {
                (self.target_loglik(&prop, &st.etas, &st.kernel, &st.states), None)
            };
            let log_ratio = ll + lp_prop - st.loglik - lp_cur;
            if ll.is_finite() && (log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio) {
                st.theta = prop;
                st.loglik = ll;
                accepted[i] += 1;
                if i < k {
                    st.etas.copy_from_slice(&prop_etas);
                }
                if let Some(kern) = new_kernel {
                    st.kernel = kern;
                }
            }
        }
    }

    fn state_sweep<R: Rng>(&self, st: &mut ChainState, rng: &mut R) {
        let data = self.eval.data;
        let t_len = data.n_periods();
        let mut le1 = vec![0.0; t_len];
        for (n, tp) in st.transitions.iter().enumerate() {
            let counts = data.segment_counts(n);
            for t in 0..t_len {
                le1[t] = st.kernel.log_pmf(counts[t], st.etas[n * t_len + t]);
            }
            let pass = forward(counts, &le1, tp);
            backward_sample(&pass, tp, rng, &mut st.states[n * t_len..(n + 1) * t_len]);
        }
    }

    fn transition_sweep<R: Rng>(&self, st: &mut ChainState, rng: &mut R) -> usize {
        let t_len = self.eval.data.n_periods();
        let mut acc = 0;
        for (n, tp) in st.transitions.iter_mut().enumerate() {
            let (new, ok) = update_transitions(*tp, &st.states[n * t_len..(n + 1) * t_len], self.priors, rng);
            *tp = new;
            acc += usize::from(ok);
        }
        acc
    }
}

/// Starting point shared by all chains before jitter.
struct Start {
    theta: Vec<f64>,
    jitter: Vec<f64>,
    scales: Vec<f64>,
}

fn starting_point(spec: &ModelSpec, data: &PanelData, layout: &ParamLayout) -> Result<Start> {
    let base = ModelSpec::new(spec.family, Structure::Standard);
    let opts = OptimOptions::default();
    let mle = fit_mle(&base, data, None, &opts)?;
    let mut init = mle.estimates.clone();
    match spec.structure {
        Structure::ZeroInflatedTau => init.tau = Some(-1.0),
        Structure::ZeroInflatedGamma => {
            init.gamma = Some(vec![0.0; layout.n_gamma]);
        }
        _ => {}
    }
    let theta = layout.pack(&init);
    let p = theta.len();
    let mut jitter = vec![0.1; p];
    let mut scales = vec![0.1; p];
    if let Some(se) = &mle.std_errors {
        for (j, s) in se.iter().enumerate() {
            jitter[j] = 2.0 * s;
            scales[j] = s.max(1e-4);
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Init("starting fit has non-finite estimates".into()));
    }
    Ok(Start { theta, jitter, scales })
}

fn run_chain(
    spec: &ModelSpec,
    data: &PanelData,
    priors: &PriorConfig,
    cfg: &McmcConfig,
    start: &Start,
    chain: usize,
) -> Result<Chain> {
    let eval = Evaluator::new(spec, data)?;
    let layout = ParamLayout::new(spec, data.variable_names());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);

    let mut theta: Vec<f64> = start
        .theta
        .iter()
        .zip(&start.jitter)
        .map(|(v, j)| v + j * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if let Some(i) = layout.log_alpha_index() {
        theta[i] = theta[i].clamp(priors.log_alpha_min + 1.0, priors.log_alpha_max - 1.0);
    }
    let n_cells = data.n_cells();
    let states: Vec<u8> = data
        .counts()
        .iter()
        .map(|&a| if a > 0 { 1 } else { u8::from(rng.random::<bool>()) })
        .collect();
    let transitions = if spec.is_switching() {
        vec![TransitionPair::new(0.5, 0.5).expect("interior"); data.n_segments()]
    } else {
        Vec::new()
    };

    let mut sampler = Sampler {
        eval,
        layout: layout.clone(),
        priors,
        scratch: ParamSet::new(Vec::new()),
    };
    let mut p0 = layout.unpack(&theta);
    if spec.is_switching() {
        p0.transitions = Some(transitions.clone());
    }
    let kernel = sampler.eval.kernel_for(&p0);
    let etas = sampler.eval.etas(&p0.beta);
    let mut st = ChainState {
        theta,
        etas,
        kernel,
        transitions,
        states,
        loglik: 0.0,
    };
    st.loglik = sampler.target_loglik(&st.theta, &st.etas, &st.kernel, &st.states);
    if !st.loglik.is_finite() || !sampler.integrated_now(&st).is_finite() {
        return Err(Error::Init(format!("chain {chain}: log-likelihood {}", st.loglik)));
    }

    let p = st.theta.len();
    let mut scales = start.scales.clone();
    let mut window_acc = vec![0usize; p];
    let mut total_acc = vec![0usize; p];
    let mut adapt_step = 0;
    let mut trans_acc = 0usize;
    let retained = cfg.retained_per_chain();
    let mut out = Chain {
        draws: Vec::with_capacity(retained),
        loglik: Vec::with_capacity(retained),
        transitions: Vec::new(),
        state_freq: if spec.is_switching() { vec![0; n_cells] } else { Vec::new() },
        states_full: (spec.is_switching() && cfg.store_states == StateStorage::Full).then(Vec::new),
        accept_rate: Vec::new(),
        transition_accept_rate: 0.0,
        final_scales: Vec::new(),
    };

    for sweep in 0..cfg.n_draws {
        if spec.is_switching() {
            // States changed since the last sweep.
            st.loglik = sampler.target_loglik(&st.theta, &st.etas, &st.kernel, &st.states);
        }
        let burning = sweep < cfg.n_burnin;
        let acc = if burning { &mut window_acc } else { &mut total_acc };
        sampler.metropolis_sweep(&mut st, &scales, acc, &mut rng);
        if spec.is_switching() {
            sampler.state_sweep(&mut st, &mut rng);
            let a = sampler.transition_sweep(&mut st, &mut rng);
            if !burning {
                trans_acc += a;
            }
        }
        if burning && (sweep + 1) % cfg.adapt_window == 0 {
            adapt_step += 1;
            adapt_proposals(&mut scales, &window_acc, cfg.adapt_window, cfg.target_accept, adapt_step);
            window_acc.iter_mut().for_each(|a| *a = 0);
        }
        if !burning && (sweep + 1 - cfg.n_burnin).is_multiple_of(cfg.thin) {
            out.draws.push(st.theta.clone());
            out.loglik.push(sampler.integrated_now(&st));
            if spec.is_switching() {
                out.transitions.push(st.transitions.iter().map(|t| (t.p01(), t.p10())).collect());
                for (f, &s) in out.state_freq.iter_mut().zip(&st.states) {
                    *f += u32::from(s);
                }
                if let Some(full) = out.states_full.as_mut() {
                    full.push(pack_bits(&st.states));
                }
            }
        }
    }
    let kept_sweeps = (cfg.n_draws - cfg.n_burnin) as f64;
    out.accept_rate = total_acc.iter().map(|&a| a as f64 / kept_sweeps).collect();
    if spec.is_switching() {
        out.transition_accept_rate = trans_acc as f64 / (kept_sweeps * data.n_segments() as f64);
    }
    out.final_scales = scales;
    Ok(out)
}

pub fn pack_bits(states: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; states.len().div_ceil(64)];
    for (i, &s) in states.iter().enumerate() {
        if s == 1 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

pub fn unpack_bits(bits: &[u64], len: usize) -> Vec<u8> {
    (0..len).map(|i| ((bits[i / 64] >> (i % 64)) & 1) as u8).collect()
}

/// Runs `cfg.n_chains` independent chains. Output is identical for a given
/// seed regardless of thread count.
pub fn sample_posterior(
    spec: &ModelSpec,
    data: &PanelData,
    priors: &PriorConfig,
    cfg: &McmcConfig,
) -> Result<ChainDraws> {
    cfg.validate()?;
    priors.validate()?;
    let layout = ParamLayout::new(spec, data.variable_names());
    Evaluator::new(spec, data)?;
    let start = starting_point(spec, data, &layout)?;
    let chains = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(spec, data, priors, cfg, &start, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainDraws {
        spec: spec.clone(),
        names: layout.names,
        n_segments: data.n_segments(),
        n_periods: data.n_periods(),
        config: cfg.clone(),
        priors: priors.clone(),
        chains,
    })
}
