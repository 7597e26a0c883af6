//! Two-state chain for the zero / normal-count regime of a segment.
//!
//! State 0 emits only zero counts; state 1 emits from the count family.
//! Every segment starts from the stationary distribution of its own chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{log_add_exp, CountKernel, Rate};
use crate::error::{Error, Result};

/// Per-segment switching probabilities `P(0→1)` and `P(1→0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPair {
    p01: f64,
    p10: f64,
}

impl TransitionPair {
    /// Both probabilities must lie strictly inside (0, 1).
    pub fn new(p01: f64, p10: f64) -> Result<Self> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if open(p01) && open(p10) {
            Ok(Self { p01, p10 })
        } else {
            Err(Error::ParamDomain(format!(
                "transition probabilities ({p01}, {p10}) must lie in (0, 1)"
            )))
        }
    }

    /// Admits boundary values for generating data from absorbing or
    /// deterministic chains. At least one direction must be possible so the
    /// stationary distribution exists.
    pub fn closed(p01: f64, p10: f64) -> Result<Self> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if unit(p01) && unit(p10) && p01 + p10 > 0.0 {
            Ok(Self { p01, p10 })
        } else {
            Err(Error::ParamDomain(format!(
                "transition probabilities ({p01}, {p10}) must lie in [0, 1] with a positive sum"
            )))
        }
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn is_interior(&self) -> bool {
        self.p01 > 0.0 && self.p01 < 1.0 && self.p10 > 0.0 && self.p10 < 1.0
    }

    /// `ln P(next | prev)`.
    #[inline]
    pub fn log_prob(&self, prev: u8, next: u8) -> f64 {
        match (prev, next) {
            (0, 0) => (-self.p01).ln_1p(),
            (0, _) => self.p01.ln(),
            (_, 0) => self.p10.ln(),
            _ => (-self.p10).ln_1p(),
        }
    }
}

/// Long-run probabilities of the two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPair {
    pub pbar0: f64,
    pub pbar1: f64,
}

pub fn stationary(tp: &TransitionPair) -> StationaryPair {
    let s = tp.p01 + tp.p10;
    StationaryPair {
        pbar0: tp.p10 / s,
        pbar1: tp.p01 / s,
    }
}

impl StationaryPair {
    pub fn of(tp: &TransitionPair) -> Self {
        stationary(tp)
    }

    #[inline]
    pub fn log_prob(&self, state: u8) -> f64 {
        if state == 0 {
            self.pbar0.ln()
        } else {
            self.pbar1.ln()
        }
    }

    /// Largest violation of the two balance equations and of normalization.
    pub fn fixed_point_residual(&self, tp: &TransitionPair) -> f64 {
        let r0 = (1.0 - tp.p01) * self.pbar0 + tp.p10 * self.pbar1 - self.pbar0;
        let r1 = tp.p01 * self.pbar0 + (1.0 - tp.p10) * self.pbar1 - self.pbar1;
        let rn = self.pbar0 + self.pbar1 - 1.0;
        r0.abs().max(r1.abs()).max(rn.abs())
    }
}

#[inline]
fn log_emission_zero_state(a: u64) -> f64 {
    if a == 0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Forward pass of one segment. `log_e1[t]` is the normal-state
/// log-emission of `counts[t]`.
///
/// The filter is renormalized at every step; the log normalizers sum to the
/// segment log-likelihood.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `P(s_t = 1 | A_1..A_t)` per period.
    pub filtered1: Vec<f64>,
    pub loglik: f64,
}

pub fn forward(counts: &[u64], log_e1: &[f64], tp: &TransitionPair) -> ForwardPass {
    debug_assert_eq!(counts.len(), log_e1.len());
    let st = stationary(tp);
    let (l00, l01, l10, l11) = (
        tp.log_prob(0, 0),
        tp.log_prob(0, 1),
        tp.log_prob(1, 0),
        tp.log_prob(1, 1),
    );
    let mut filtered1 = Vec::with_capacity(counts.len());
    let mut loglik = 0.0;
    let (mut f0, mut f1) = (0.0, 0.0);
    for (t, (&a, &le1)) in counts.iter().zip(log_e1).enumerate() {
        let le0 = log_emission_zero_state(a);
        let (prior0, prior1) = if t == 0 {
            (st.log_prob(0), st.log_prob(1))
        } else {
            (
                log_add_exp(f0 + l00, f1 + l10),
                log_add_exp(f0 + l01, f1 + l11),
            )
        };
        let (j0, j1) = (prior0 + le0, prior1 + le1);
        let norm = log_add_exp(j0, j1);
        loglik += norm;
        if norm == f64::NEG_INFINITY {
            // Impossible observation under both states; the likelihood is zero.
            filtered1.resize(counts.len(), f64::NAN);
            return ForwardPass {
                filtered1,
                loglik: f64::NEG_INFINITY,
            };
        }
        f0 = j0 - norm;
        f1 = j1 - norm;
        filtered1.push(f1.exp());
    }
    ForwardPass { filtered1, loglik }
}

/// Segment log-likelihood with the latent path summed out.
pub fn segment_forward_loglik(
    counts: &[u64],
    rates: &[Rate],
    kernel: &CountKernel,
    tp: &TransitionPair,
) -> Result<f64> {
    if counts.len() != rates.len() || counts.is_empty() {
        return Err(Error::Schema(format!(
            "segment has {} counts and {} rates",
            counts.len(),
            rates.len()
        )));
    }
    let log_e1: Vec<f64> = counts
        .iter()
        .zip(rates)
        .map(|(&a, r)| kernel.log_pmf(a, r.ln()))
        .collect();
    Ok(forward(counts, &log_e1, tp).loglik)
}

/// Draws a state path from its exact conditional given the forward filter.
pub fn backward_sample<R: Rng + ?Sized>(
    pass: &ForwardPass,
    tp: &TransitionPair,
    rng: &mut R,
    out: &mut [u8],
) {
    let t_len = pass.filtered1.len();
    debug_assert_eq!(out.len(), t_len);
    let last = t_len - 1;
    out[last] = u8::from(rng.random::<f64>() < pass.filtered1[last]);
    for t in (0..last).rev() {
        let next = out[t + 1];
        let f1 = pass.filtered1[t];
        let w1 = f1 * if next == 1 { 1.0 - tp.p10 } else { tp.p10 };
        let w0 = (1.0 - f1) * if next == 1 { tp.p01 } else { 1.0 - tp.p01 };
        let p1 = if w1 == 0.0 { 0.0 } else { w1 / (w0 + w1) };
        out[t] = u8::from(rng.random::<f64>() < p1);
    }
}

/// Smoothed `P(s_t = 1 | all counts)` by forward–backward.
pub fn smoothed(counts: &[u64], log_e1: &[f64], tp: &TransitionPair) -> Vec<f64> {
    let pass = forward(counts, log_e1, tp);
    let t_len = counts.len();
    let mut out = vec![0.0; t_len];
    // Backward messages in log space, normalized each step.
    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    for t in (0..t_len).rev() {
        let lf1 = pass.filtered1[t].ln();
        let lf0 = (1.0 - pass.filtered1[t]).ln();
        let (g0, g1) = (lf0 + b0, lf1 + b1);
        out[t] = (g1 - log_add_exp(g0, g1)).exp();
        if t > 0 {
            let (e0, e1) = (log_emission_zero_state(counts[t]), log_e1[t]);
            let nb0 = log_add_exp(tp.log_prob(0, 0) + e0 + b0, tp.log_prob(0, 1) + e1 + b1);
            let nb1 = log_add_exp(tp.log_prob(1, 0) + e0 + b0, tp.log_prob(1, 1) + e1 + b1);
            let n = log_add_exp(nb0, nb1);
            b0 = nb0 - n;
            b1 = nb1 - n;
        }
    }
    out
}

/// `ln P(path)` under the stationary-start chain.
pub fn path_log_prior(states: &[u8], tp: &TransitionPair) -> f64 {
    let st = stationary(tp);
    let mut lp = st.log_prob(states[0]);
    for w in states.windows(2) {
        lp += tp.log_prob(w[0], w[1]);
    }
    lp
}

/// Counts of `(0→0, 0→1, 1→0, 1→1)` moves along a path.
pub fn transition_counts(states: &[u8]) -> [u32; 4] {
    let mut c = [0u32; 4];
    for w in states.windows(2) {
        c[(w[0] * 2 + w[1]) as usize] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_examples() {
        let s = stationary(&TransitionPair::new(0.3, 0.6).unwrap());
        assert!((s.pbar0 - 2.0 / 3.0).abs() < 1e-15 && (s.pbar1 - 1.0 / 3.0).abs() < 1e-15);
        let s = stationary(&TransitionPair::new(0.5, 0.5).unwrap());
        assert_eq!((s.pbar0, s.pbar1), (0.5, 0.5));
        let s = stationary(&TransitionPair::new(0.7, 0.2).unwrap());
        assert!(s.pbar1 > s.pbar0);
    }

    #[test]
    fn transition_domain() {
        assert!(TransitionPair::new(0.0, 0.5).is_err());
        assert!(TransitionPair::new(0.5, 1.0).is_err());
        assert!(TransitionPair::closed(0.0, 1.0).is_ok());
        assert!(TransitionPair::closed(0.0, 0.0).is_err());
        assert!(TransitionPair::closed(1.2, 0.5).is_err());
    }

    #[test]
    fn one_period() {
        let tp = TransitionPair::new(0.3, 0.4).unwrap();
        let k = CountKernel::negbin(0.5, 5);
        let eta = 0.2;
        let ll = forward(&[0], &[k.log_pmf(0, eta)], &tp).loglik;
        let st = stationary(&tp);
        let want = (st.pbar0 + st.pbar1 * k.log_pmf(0, eta).exp()).ln();
        assert!((ll - want).abs() < 1e-14);
    }

    #[test]
    fn all_positive_counts() {
        let tp = TransitionPair::new(0.3, 0.4).unwrap();
        let k = CountKernel::negbin(0.5, 10);
        let counts = [2u64, 1, 4, 3];
        let le: Vec<f64> = counts.iter().map(|&a| k.log_pmf(a, 0.7)).collect();
        let ll = forward(&counts, &le, &tp).loglik;
        let want = stationary(&tp).pbar1.ln() + 3.0 * (0.6f64).ln() + le.iter().sum::<f64>();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn forced_states_sampled_as_one() {
        let tp = TransitionPair::new(0.3, 0.4).unwrap();
        let counts = [0u64, 3, 0, 1, 0];
        let le: Vec<f64> = counts.iter().map(|&a| -(a as f64) - 1.0).collect();
        let pass = forward(&counts, &le, &tp);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = [0u8; 5];
        for _ in 0..500 {
            backward_sample(&pass, &tp, &mut rng, &mut s);
            assert_eq!((s[1], s[3]), (1, 1));
        }
    }

    #[test]
    fn transition_count_tally() {
        assert_eq!(transition_counts(&[0, 0, 1, 1, 0]), [1, 1, 1, 1]);
        assert_eq!(transition_counts(&[1]), [0, 0, 0, 0]);
    }
}
