//! Pearson χ² goodness of fit with a Monte Carlo reference distribution.
//!
//! Counts are pooled into categories `{0}, {1}, …` grown greedily from zero
//! until each category's model-expected occupancy reaches
//! [`MIN_EXPECTED`]; everything above the last closed category forms an
//! open tail, merged into its neighbour when it falls short.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cell_log_prob, Evaluator, ModelSpec, ParamSet};
use crate::panel::{simulate_counts, PanelData};

pub const MIN_EXPECTED: f64 = 5.0;
const MAX_SCANNED_COUNT: u64 = 1_000_000;

/// Count categories by their lower bounds; the last one is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEdges {
    pub lower: Vec<u64>,
}

impl CellEdges {
    pub fn n_cells(&self) -> usize {
        self.lower.len()
    }

    pub fn cell_of(&self, a: u64) -> usize {
        self.lower.partition_point(|&lo| lo <= a) - 1
    }

    pub fn tally(&self, counts: &[u64]) -> Vec<f64> {
        let mut o = vec![0.0; self.n_cells()];
        for &a in counts {
            o[self.cell_of(a)] += 1.0;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub chi2_observed: f64,
    pub p_value: f64,
    pub n_replications: usize,
    pub cell_edges: CellEdges,
    pub expected_cell_counts: Vec<f64>,
    pub observed_cell_counts: Vec<f64>,
    pub construction: String,
}

/// Pooled categories and their expected occupancies under `params`.
pub fn expected_cells(data: &PanelData, spec: &ModelSpec, params: &ParamSet) -> Result<(CellEdges, Vec<f64>)> {
    params.validate(spec, data.n_covariates(), data.n_segments())?;
    let eval = Evaluator::new(spec, data)?;
    let kernel = eval.kernel_for(params);
    let etas = eval.etas(&params.beta);
    let weights = eval.cell_weights(params, &etas);
    let total = data.n_cells() as f64;

    let mut lower = Vec::new();
    let mut expected = Vec::new();
    let mut closed_mass = 0.0;
    let mut open = (0u64, 0.0);
    let mut a = 0u64;
    while total - closed_mass - open.1 >= MIN_EXPECTED && a < MAX_SCANNED_COUNT {
        let e: f64 = etas
            .iter()
            .zip(&weights)
            .map(|(&eta, &(w0, w1))| cell_log_prob(&kernel, a, eta, w0, w1).exp())
            .sum();
        open.1 += e;
        a += 1;
        if open.1 >= MIN_EXPECTED {
            lower.push(open.0);
            expected.push(open.1);
            closed_mass += open.1;
            open = (a, 0.0);
        }
    }
    let tail = total - closed_mass;
    if tail >= MIN_EXPECTED || lower.is_empty() {
        lower.push(open.0);
        expected.push(tail);
    } else {
        *expected.last_mut().expect("non-empty") += tail;
    }
    if lower.len() < 2 {
        return Err(Error::DegenerateCells(lower.len()));
    }
    Ok((CellEdges { lower }, expected))
}

pub fn pearson(observed: &[f64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum()
}

/// Pearson statistic of the observed counts.
pub fn chi2_statistic(data: &PanelData, spec: &ModelSpec, params: &ParamSet) -> Result<f64> {
    let (edges, expected) = expected_cells(data, spec, params)?;
    Ok(pearson(&edges.tally(data.counts()), &expected))
}

/// Monte Carlo p-value with the add-one rule. Replicates regenerate states
/// and counts with the covariates held fixed; cell edges are shared.
pub fn gof_pvalue(
    data: &PanelData,
    spec: &ModelSpec,
    params: &ParamSet,
    replications: usize,
    seed: u64,
) -> Result<GofResult> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    let (edges, expected) = expected_cells(data, spec, params)?;
    let observed = edges.tally(data.counts());
    let chi2_obs = pearson(&observed, &expected);
    let exceed = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let (counts, _) = simulate_counts(spec, params, data, &mut rng);
            usize::from(pearson(&edges.tally(&counts), &expected) >= chi2_obs)
        })
        .sum::<usize>();
    Ok(GofResult {
        chi2_observed: chi2_obs,
        p_value: (exceed + 1) as f64 / (replications + 1) as f64,
        n_replications: replications,
        cell_edges: edges,
        expected_cell_counts: expected,
        observed_cell_counts: observed,
        construction: format!("pearson over pooled count categories, expected >= {MIN_EXPECTED}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, Structure};

    fn flat_panel(counts: Vec<u64>) -> PanelData {
        let n = counts.len();
        PanelData::from_parts(n, 1, counts, vec![vec![]; n], vec![]).unwrap()
    }

    #[test]
    fn edges_lookup() {
        let e = CellEdges { lower: vec![0, 1, 3] };
        assert_eq!(e.cell_of(0), 0);
        assert_eq!(e.cell_of(2), 1);
        assert_eq!(e.cell_of(99), 2);
        assert_eq!(e.tally(&[0, 0, 2, 7]), vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn pooled_cells_meet_minimum() {
        let d = flat_panel(vec![0; 400]);
        let spec = ModelSpec::new(Family::Poisson, Structure::Standard);
        let (edges, e) = expected_cells(&d, &spec, &ParamSet::new(vec![1.0f64.ln()])).unwrap();
        assert!(e.iter().all(|v| *v >= MIN_EXPECTED));
        assert!((e.iter().sum::<f64>() - 400.0).abs() < 1e-9);
        assert_eq!(edges.lower[0], 0);
    }

    #[test]
    fn perfect_fit_is_zero() {
        assert_eq!(pearson(&[5.0, 7.5], &[5.0, 7.5]), 0.0);
    }

    #[test]
    fn single_cell_degenerate() {
        let d = flat_panel(vec![0; 20]);
        let spec = ModelSpec::new(Family::Poisson, Structure::Standard);
        let r = chi2_statistic(&d, &spec, &ParamSet::new(vec![-30.0]));
        assert!(matches!(r, Err(Error::DegenerateCells(1))));
    }

    #[test]
    fn zero_replications_rejected() {
        let d = flat_panel(vec![0, 1, 2, 3]);
        let spec = ModelSpec::new(Family::Poisson, Structure::Standard);
        assert!(gof_pvalue(&d, &spec, &ParamSet::new(vec![0.0]), 0, 1).is_err());
    }
}
