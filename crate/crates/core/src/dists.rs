//! Count probability mass functions and the log-link rate.
//!
//! Everything is evaluated in log space. The negative binomial is written in
//! a form that stays accurate as the dispersion goes to zero:
//!
//! ```text
//! ln NB(a; λ, α) = Σ_{j<a} ln(1 + jα) − ln a! + a·ln λ − (a + 1/α)·ln(1 + αλ)
//! ```
//!
//! which is algebraically identical to the gamma-function form and reduces
//! to the Poisson log-pmf term by term as α → 0.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Over-dispersion of the negative binomial, stored as `ln α`.
///
/// `α = 0` (log `-inf`) is the Poisson limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    log_alpha: f64,
}

impl Dispersion {
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::ParamDomain(format!("dispersion alpha = {alpha}")));
        }
        Ok(Self { log_alpha: alpha.ln() })
    }

    pub fn from_log_alpha(log_alpha: f64) -> Result<Self> {
        if log_alpha.is_nan() || log_alpha == f64::INFINITY {
            return Err(Error::ParamDomain(format!("log alpha = {log_alpha}")));
        }
        Ok(Self { log_alpha })
    }

    pub fn alpha(self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn log_alpha(self) -> f64 {
        self.log_alpha
    }
}

/// Strictly positive expected count in the normal-count state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Rate(f64);

impl Rate {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && !lambda.is_nan() {
            Ok(Self(lambda))
        } else {
            Err(Error::ParamDomain(format!("rate lambda = {lambda}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }
}

const EXACT_FACTORIALS: usize = 21;

fn ln_factorial_table() -> &'static [f64; EXACT_FACTORIALS] {
    static TABLE: OnceLock<[f64; EXACT_FACTORIALS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; EXACT_FACTORIALS];
        let mut fact: u64 = 1;
        for (a, slot) in table.iter_mut().enumerate() {
            if a > 0 {
                fact *= a as u64;
            }
            *slot = (fact as f64).ln();
        }
        table
    })
}

/// `ln a!`, exact-rounded through 20! and via `ln Γ(a+1)` beyond.
pub fn ln_factorial(a: u64) -> f64 {
    if (a as usize) < EXACT_FACTORIALS {
        ln_factorial_table()[a as usize]
    } else {
        ln_gamma(a as f64 + 1.0)
    }
}

/// `Σ_{j<a} ln(1 + jα)`, i.e. `ln Γ(a + 1/α) − ln Γ(1/α) + a ln α`.
fn nb_rising_term(a: u64, alpha: f64) -> f64 {
    if a <= 2000 || alpha < 1e-6 {
        (1..a).map(|j| (j as f64 * alpha).ln_1p()).sum()
    } else {
        let r = 1.0 / alpha;
        ln_gamma(a as f64 + r) - ln_gamma(r) + a as f64 * alpha.ln()
    }
}

/// Log-pmf of the negative binomial with mean `λ` and variance `λ(1 + αλ)`.
///
/// `α = 0` evaluates the Poisson limit.
pub fn nb_log_pmf(a: u64, lambda: Rate, alpha: Dispersion) -> f64 {
    let alpha = alpha.alpha();
    if alpha == 0.0 {
        return poisson_log_pmf(a, lambda);
    }
    let lam = lambda.value();
    nb_rising_term(a, alpha) - ln_factorial(a) + a as f64 * lam.ln()
        - (a as f64 + 1.0 / alpha) * (alpha * lam).ln_1p()
}

/// `ln(λ^a e^{-λ} / a!)`.
pub fn poisson_log_pmf(a: u64, lambda: Rate) -> f64 {
    let lam = lambda.value();
    a as f64 * lam.ln() - lam - ln_factorial(a)
}

/// Probability mass of the zero-count state: 1 at zero, 0 elsewhere.
pub fn zero_mass(a: u64) -> f64 {
    if a == 0 {
        1.0
    } else {
        0.0
    }
}

/// Inner product `β'x`.
pub fn linear_predictor(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() {
        return Err(Error::Schema(format!(
            "coefficient length {} does not match covariate length {}",
            beta.len(),
            x.len()
        )));
    }
    Ok(dot(beta, x))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Log-link rate `λ = exp(β'x)`.
pub fn rate(beta: &[f64], x: &[f64]) -> Result<Rate> {
    let eta = linear_predictor(beta, x)?;
    Rate::new(eta.exp())
}

/// Emission kernel for the normal-count state, evaluated from the linear
/// predictor `η = ln λ`. For the negative binomial the α-dependent constants
/// are tabulated once per dispersion value.
#[derive(Debug, Clone)]
pub enum CountKernel {
    Poisson,
    NegBin {
        alpha: f64,
        inv_alpha: f64,
        consts: Vec<f64>,
    },
}

impl CountKernel {
    /// `max_count` sizes the constant table; larger counts are still handled.
    pub fn negbin(alpha: f64, max_count: u64) -> Self {
        if alpha == 0.0 {
            return CountKernel::Poisson;
        }
        let n = max_count as usize + 1;
        let mut consts = Vec::with_capacity(n);
        let mut rising = 0.0;
        for a in 0..n {
            if a > 0 {
                rising += ((a - 1) as f64 * alpha).ln_1p();
            }
            consts.push(rising - ln_factorial(a as u64));
        }
        CountKernel::NegBin {
            alpha,
            inv_alpha: 1.0 / alpha,
            consts,
        }
    }

    pub fn poisson() -> Self {
        CountKernel::Poisson
    }

    /// Dispersion `α`, zero for Poisson.
    pub fn alpha(&self) -> f64 {
        match self {
            CountKernel::Poisson => 0.0,
            CountKernel::NegBin { alpha, .. } => *alpha,
        }
    }

    #[inline]
    pub fn log_pmf(&self, a: u64, eta: f64) -> f64 {
        match self {
            CountKernel::Poisson => a as f64 * eta - eta.exp() - ln_factorial(a),
            CountKernel::NegBin {
                alpha,
                inv_alpha,
                consts,
            } => {
                let c = match consts.get(a as usize) {
                    Some(c) => *c,
                    None => nb_rising_term(a, *alpha) - ln_factorial(a),
                };
                c + a as f64 * eta - (a as f64 + inv_alpha) * (alpha * eta.exp()).ln_1p()
            }
        }
    }

    /// `ln P(A = 0)` in the normal-count state.
    #[inline]
    pub fn log_pmf_zero(&self, eta: f64) -> f64 {
        match self {
            CountKernel::Poisson => -eta.exp(),
            CountKernel::NegBin {
                alpha, inv_alpha, ..
            } => -inv_alpha * (alpha * eta.exp()).ln_1p(),
        }
    }

    /// Variance of the count given mean `λ`.
    pub fn variance(&self, lambda: f64) -> f64 {
        lambda * (1.0 + self.alpha() * lambda)
    }
}

/// Numerically stable `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted `ln Σ exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(1 / (1 + e^{-z}))` without overflow.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
