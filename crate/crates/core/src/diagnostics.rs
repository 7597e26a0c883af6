//! Potential scale reduction factors.
//!
//! Both statistics use the Brooks–Gelman pooled variance
//! `V̂ = (n−1)/n · W + (m+1)/m · B/n`, so the multivariate factor of a single
//! parameter equals its univariate factor.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::ChainDraws;

/// Fit reports flag non-convergence above this value by default.
pub const DEFAULT_THRESHOLD: f64 = 1.1;

fn check_shape(m: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Data("at least two chains are required".into()));
    }
    if n < 10 {
        return Err(Error::Data("at least ten draws per chain are required".into()));
    }
    Ok(())
}

/// Univariate PSRF of one parameter given its per-chain draws.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let n = chains.first().map_or(0, Vec::len);
    check_shape(m, n)?;
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Data("chains have different lengths".into()));
    }
    let (mf, nf) = (m as f64, n as f64);
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / mf;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / mf;
    if !(w > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let b_over_n = means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (mf - 1.0);
    let v = (nf - 1.0) / nf * w + (mf + 1.0) / mf * b_over_n;
    Ok((v / w).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpsrf {
    pub value: f64,
    /// Whether the within-chain covariance needed a ridge to be inverted.
    pub regularized: bool,
}

/// Multivariate PSRF; `chains[j][t]` is the parameter vector of draw `t`
/// in chain `j`.
pub fn mpsrf(chains: &[Vec<Vec<f64>>]) -> Result<Mpsrf> {
    let m = chains.len();
    let n = chains.first().map_or(0, Vec::len);
    let p = chains.first().and_then(|c| c.first()).map_or(0, Vec::len);
    check_shape(m, n)?;
    if p == 0 {
        return Err(Error::Data("no parameters".into()));
    }
    if n <= p {
        return Err(Error::Data(format!("{n} draws per chain for {p} parameters")));
    }
    if chains.iter().any(|c| c.len() != n || c.iter().any(|d| d.len() != p)) {
        return Err(Error::Data("ragged chain draws".into()));
    }
    let (mf, nf) = (m as f64, n as f64);
    let means: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| (0..p).map(|k| c.iter().map(|d| d[k]).sum::<f64>() / nf).collect())
        .collect();
    let grand: Vec<f64> = (0..p).map(|k| means.iter().map(|mu| mu[k]).sum::<f64>() / mf).collect();

    let mut w = DMatrix::<f64>::zeros(p, p);
    let mut dev = vec![0.0; p];
    for (c, mu) in chains.iter().zip(&means) {
        for d in c {
            for k in 0..p {
                dev[k] = d[k] - mu[k];
            }
            for i in 0..p {
                for j in 0..=i {
                    w[(i, j)] += dev[i] * dev[j];
                }
            }
        }
    }
    let mut b = DMatrix::<f64>::zeros(p, p);
    for mu in &means {
        for i in 0..p {
            for j in 0..=i {
                b[(i, j)] += (mu[i] - grand[i]) * (mu[j] - grand[j]);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            w[(j, i)] = w[(i, j)];
            b[(j, i)] = b[(i, j)];
        }
    }
    w /= mf * (nf - 1.0);
    b /= mf - 1.0;

    // A pivot tiny relative to its variance means W is numerically singular.
    let well_conditioned = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        let l = c.l_dirty();
        (0..p).all(|i| l[(i, i)].powi(2) > 1e-10 * w[(i, i)])
    };
    let mut regularized = false;
    let chol = match w.clone().cholesky().filter(well_conditioned) {
        Some(c) => c,
        None => {
            regularized = true;
            let ridge = 1e-10 * w.trace() / p as f64;
            if !(ridge > 0.0) {
                return Err(Error::DegenerateVariance);
            }
            let mut wr = w.clone();
            for i in 0..p {
                wr[(i, i)] += ridge;
            }
            wr.cholesky().ok_or(Error::DegenerateVariance)?
        }
    };
    // Eigenvalues of W⁻¹B equal those of L⁻¹ B L⁻ᵀ.
    let l = chol.l();
    let y = l.solve_lower_triangular(&b).ok_or(Error::DegenerateVariance)?;
    let z = l.solve_lower_triangular(&y.transpose()).ok_or(Error::DegenerateVariance)?;
    let sym = (&z + z.transpose()) * 0.5;
    let lambda = sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = ((nf - 1.0) / nf + (mf + 1.0) / mf * lambda).sqrt();
    Ok(Mpsrf { value, regularized })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub names: Vec<String>,
    pub psrf: Vec<f64>,
    pub max_psrf: f64,
    pub mpsrf: f64,
    pub mpsrf_regularized: bool,
    pub n_chains: usize,
    pub n_draws_per_chain: usize,
    pub threshold: f64,
    pub converged: bool,
}

/// PSRF of every continuous quantity and their joint MPSRF.
pub fn convergence_report(draws: &ChainDraws, threshold: f64) -> Result<ConvergenceReport> {
    let (names, chains) = draws.diagnostic_matrices();
    let psrf_values = (0..names.len())
        .into_par_iter()
        .map(|k| {
            let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|d| d[k]).collect()).collect();
            psrf(&per_chain)
        })
        .collect::<Result<Vec<_>>>()?;
    let joint = mpsrf(&chains)?;
    let max_psrf = psrf_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if joint.regularized {
        log::warn!("within-chain covariance is singular; MPSRF computed with a ridge");
    }
    Ok(ConvergenceReport {
        converged: max_psrf <= threshold && joint.value <= threshold,
        names,
        psrf: psrf_values,
        max_psrf,
        mpsrf: joint.value,
        mpsrf_regularized: joint.regularized,
        n_chains: chains.len(),
        n_draws_per_chain: chains.first().map_or(0, Vec::len),
        threshold,
    })
}
