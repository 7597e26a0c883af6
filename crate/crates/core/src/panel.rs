//! Balanced panels of counts with per-observation covariates.
//!
//! Cells are stored segment-major: cell `n * T + t` is segment `n` in
//! period `t`. The first covariate of every cell is the intercept.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dists::{dot, sigmoid};
use crate::error::{Error, Result};
use crate::markov::stationary;
use crate::model::{Family, ModelSpec, ParamSet, Structure};

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    n_segments: usize,
    n_periods: usize,
    counts: Vec<u64>,
    covariates: Vec<f64>,
    variable_names: Vec<String>,
    segment_ids: Vec<String>,
    period_ids: Vec<String>,
}

impl PanelData {
    /// Builds a panel from segment-major counts and per-cell covariate
    /// vectors (without intercept); the intercept column is prepended.
    pub fn from_parts(
        n_segments: usize,
        n_periods: usize,
        counts: Vec<u64>,
        covariates: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        if n_segments == 0 || n_periods == 0 {
            return Err(Error::BalancedPanel("panel must have at least one segment and period".into()));
        }
        let cells = n_segments * n_periods;
        if counts.len() != cells || covariates.len() != cells {
            return Err(Error::BalancedPanel(format!(
                "{n_segments} x {n_periods} panel needs {cells} cells, got {} counts and {} covariate rows",
                counts.len(),
                covariates.len()
            )));
        }
        let k = names.len();
        let mut flat = Vec::with_capacity(cells * (k + 1));
        for (c, row) in covariates.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Schema(format!(
                    "cell {c} has {} covariates, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("cell {c} has a non-finite covariate")));
            }
            flat.push(1.0);
            flat.extend_from_slice(row);
        }
        let mut variable_names = vec![INTERCEPT.to_string()];
        variable_names.extend(names);
        Ok(Self {
            n_segments,
            n_periods,
            counts,
            covariates: flat,
            variable_names,
            segment_ids: (1..=n_segments).map(|i| i.to_string()).collect(),
            period_ids: (1..=n_periods).map(|i| i.to_string()).collect(),
        })
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    /// Number of covariates including the intercept.
    pub fn n_covariates(&self) -> usize {
        self.variable_names.len()
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn segment_ids(&self) -> &[String] {
        &self.segment_ids
    }

    pub fn period_ids(&self) -> &[String] {
        &self.period_ids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn cell(&self, n: usize, t: usize) -> usize {
        n * self.n_periods + t
    }

    #[inline]
    pub fn count(&self, n: usize, t: usize) -> u64 {
        self.counts[self.cell(n, t)]
    }

    pub fn segment_counts(&self, n: usize) -> &[u64] {
        &self.counts[n * self.n_periods..(n + 1) * self.n_periods]
    }

    #[inline]
    pub fn x_cell(&self, cell: usize) -> &[f64] {
        let k = self.variable_names.len();
        &self.covariates[cell * k..(cell + 1) * k]
    }

    pub fn x(&self, n: usize, t: usize) -> &[f64] {
        self.x_cell(self.cell(n, t))
    }

    /// Same covariates and labels, new counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != self.counts.len() {
            return Err(Error::BalancedPanel("count vector has the wrong length".into()));
        }
        Ok(Self {
            counts,
            ..self.clone()
        })
    }
}

/// Latent state per cell, segment-major, 0 = zero state, 1 = count state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMatrix {
    n_segments: usize,
    n_periods: usize,
    states: Vec<u8>,
}

impl StateMatrix {
    pub fn filled(n_segments: usize, n_periods: usize, value: u8) -> Self {
        Self {
            n_segments,
            n_periods,
            states: vec![value; n_segments * n_periods],
        }
    }

    pub fn from_vec(n_segments: usize, n_periods: usize, states: Vec<u8>) -> Result<Self> {
        if states.len() != n_segments * n_periods || states.iter().any(|&s| s > 1) {
            return Err(Error::ParamDomain("state matrix must be n x T of zeros and ones".into()));
        }
        Ok(Self {
            n_segments,
            n_periods,
            states,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn get(&self, n: usize, t: usize) -> u8 {
        self.states[n * self.n_periods + t]
    }

    pub fn set(&mut self, n: usize, t: usize, s: u8) {
        self.states[n * self.n_periods + t] = s;
    }

    pub fn segment(&self, n: usize) -> &[u8] {
        &self.states[n * self.n_periods..(n + 1) * self.n_periods]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.states
    }
}

/// Summary of one covariate over all observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Mean, sample standard deviation, min, median and max of each covariate
/// (intercept excluded).
pub fn summarize(data: &PanelData) -> Vec<VariableSummary> {
    let k = data.n_covariates();
    (1..k)
        .map(|j| {
            let mut col: Vec<f64> = (0..data.n_cells()).map(|c| data.x_cell(c)[j]).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = if col.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            col.sort_by(f64::total_cmp);
            let m = col.len();
            let median = if m % 2 == 1 {
                col[m / 2]
            } else {
                0.5 * (col[m / 2 - 1] + col[m / 2])
            };
            VariableSummary {
                name: data.variable_names()[j].clone(),
                mean,
                sd,
                min: col[0],
                median,
                max: col[m - 1],
            }
        })
        .collect()
}

/// Column names of the panel CSV format.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub segment: String,
    pub period: String,
    pub count: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            segment: "segment_id".into(),
            period: "period".into(),
            count: "count".into(),
        }
    }
}

fn parse_count(raw: &str, line: usize) -> Result<u64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    Err(Error::CountDomain(format!(
        "row {line}: count '{s}' is not a nonnegative integer"
    )))
}

/// Sorts identifiers numerically when they all parse as integers,
/// lexicographically otherwise.
fn sorted_ids(ids: impl Iterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = ids.collect();
    v.sort();
    v.dedup();
    if v.iter().all(|s| s.parse::<i64>().is_ok()) {
        v.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    v
}

/// Reads a panel from CSV. Columns other than the three key columns are
/// covariates, in header order.
pub fn load_panel<R: Read>(source: R, schema: &CsvSchema) -> Result<PanelData> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let (si, pi, ci) = (find(&schema.segment)?, find(&schema.period)?, find(&schema.count)?);
    let cov_cols: Vec<usize> = (0..header.len()).filter(|i| ![si, pi, ci].contains(i)).collect();
    let names: Vec<String> = cov_cols.iter().map(|&i| header[i].to_string()).collect();

    let mut rows: Vec<(String, String, u64, Vec<f64>)> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {line} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let count = parse_count(&rec[ci], line)?;
        let cov = cov_cols
            .iter()
            .map(|&i| {
                rec[i].parse::<f64>().map_err(|_| {
                    Error::Schema(format!("row {line}: covariate '{}' is not numeric", &rec[i]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((rec[si].to_string(), rec[pi].to_string(), count, cov));
    }
    if rows.is_empty() {
        return Err(Error::BalancedPanel("no data rows".into()));
    }

    let seg_ids = sorted_ids(rows.iter().map(|r| r.0.clone()));
    let per_ids = sorted_ids(rows.iter().map(|r| r.1.clone()));
    let seg_index: HashMap<&str, usize> = seg_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let per_index: HashMap<&str, usize> = per_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let (n, t_len) = (seg_ids.len(), per_ids.len());

    let mut counts = vec![0u64; n * t_len];
    let mut covs: Vec<Option<Vec<f64>>> = vec![None; n * t_len];
    for (seg, per, count, cov) in rows {
        let c = seg_index[seg.as_str()] * t_len + per_index[per.as_str()];
        if covs[c].is_some() {
            return Err(Error::BalancedPanel(format!(
                "segment {seg} period {per} appears more than once"
            )));
        }
        counts[c] = count;
        covs[c] = Some(cov);
    }
    if let Some(c) = covs.iter().position(Option::is_none) {
        return Err(Error::BalancedPanel(format!(
            "segment {} has no row for period {}",
            seg_ids[c / t_len],
            per_ids[c % t_len]
        )));
    }
    let mut data = PanelData::from_parts(n, t_len, counts, covs.into_iter().map(Option::unwrap).collect(), names)?;
    data.segment_ids = seg_ids;
    data.period_ids = per_ids;
    Ok(data)
}

/// Writes a panel in the same CSV layout `load_panel` reads.
pub fn write_panel<W: Write>(data: &PanelData, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["segment_id".to_string(), "period".into(), "count".into()];
    header.extend(data.variable_names()[1..].iter().cloned());
    w.write_record(&header)?;
    for n in 0..data.n_segments() {
        for t in 0..data.n_periods() {
            let mut rec = vec![
                data.segment_ids[n].clone(),
                data.period_ids[t].clone(),
                data.count(n, t).to_string(),
            ];
            rec.extend(data.x(n, t)[1..].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Draws the covariates of one cell given `(segment, period, rng)`.
pub type CovariateFn = Arc<dyn Fn(usize, usize, &mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// How covariates of a synthetic panel are produced. Returned vectors
/// exclude the intercept.
#[derive(Clone)]
pub enum CovariateRule {
    /// Independent standard-normal draws per cell.
    StandardNormal { n_covariates: usize },
    /// Reuse the covariates of an existing panel of the same shape.
    Fixed(Arc<PanelData>),
    /// `f(segment, period, rng)`.
    Custom {
        names: Vec<String>,
        draw: CovariateFn,
    },
}

impl std::fmt::Debug for CovariateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovariateRule::StandardNormal { n_covariates } => {
                write!(f, "StandardNormal({n_covariates})")
            }
            CovariateRule::Fixed(_) => write!(f, "Fixed"),
            CovariateRule::Custom { names, .. } => write!(f, "Custom({names:?})"),
        }
    }
}

impl CovariateRule {
    fn names(&self) -> Vec<String> {
        match self {
            CovariateRule::StandardNormal { n_covariates } => {
                (1..=*n_covariates).map(|i| format!("x{i}")).collect()
            }
            CovariateRule::Fixed(d) => d.variable_names()[1..].to_vec(),
            CovariateRule::Custom { names, .. } => names.clone(),
        }
    }
}

/// Draws one count from the family with linear predictor `eta`.
pub(crate) fn draw_count<R: Rng + ?Sized>(family: Family, alpha: f64, eta: f64, rng: &mut R) -> u64 {
    let lambda = eta.exp();
    let mean = match family {
        Family::Poisson => lambda,
        Family::NegativeBinomial if alpha > 0.0 => {
            let shape = 1.0 / alpha;
            match Gamma::new(shape, alpha * lambda) {
                Ok(g) => g.sample(rng),
                Err(_) => lambda,
            }
        }
        Family::NegativeBinomial => lambda,
    };
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => {
            let v: f64 = p.sample(rng);
            v as u64
        }
        Err(_) => u64::MAX,
    }
}

/// Draws latent states and counts for fixed covariates. Returns
/// `(counts, states)`, both segment-major.
pub fn simulate_counts<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &ParamSet,
    data: &PanelData,
    rng: &mut R,
) -> (Vec<u64>, Vec<u8>) {
    let n_cells = data.n_cells();
    let t_len = data.n_periods();
    let alpha = params.alpha().unwrap_or(0.0);
    let mut counts = Vec::with_capacity(n_cells);
    let mut states = Vec::with_capacity(n_cells);
    let gamma_idx = spec.gamma_indices(data.n_covariates());
    for c in 0..n_cells {
        let x = data.x_cell(c);
        let eta = dot(&params.beta, x);
        let s = match spec.structure {
            Structure::Standard => 1,
            Structure::ZeroInflatedTau | Structure::ZeroInflatedGamma => {
                let z = if spec.structure == Structure::ZeroInflatedTau {
                    params.tau.unwrap_or(0.0) * eta
                } else {
                    let g = params.gamma.as_deref().unwrap_or(&[]);
                    gamma_idx.iter().zip(g).map(|(&i, gi)| gi * x[i]).sum()
                };
                u8::from(rng.random::<f64>() >= sigmoid(z))
            }
            Structure::MarkovSwitching => {
                let tp = &params.transitions.as_ref().expect("validated")[c / t_len];
                let u = rng.random::<f64>();
                if c % t_len == 0 {
                    u8::from(u < stationary(tp).pbar1)
                } else if states[c - 1] == 0 {
                    u8::from(u < tp.p01())
                } else {
                    u8::from(u >= tp.p10())
                }
            }
        };
        states.push(s);
        counts.push(if s == 0 { 0 } else { draw_count(spec.family, alpha, eta, rng) });
    }
    (counts, states)
}

/// Generates a synthetic panel and its true states from `truth`.
pub fn simulate_panel(
    spec: &ModelSpec,
    truth: &ParamSet,
    covgen: &CovariateRule,
    n_segments: usize,
    n_periods: usize,
    seed: u64,
) -> Result<(PanelData, StateMatrix)> {
    if n_segments == 0 || n_periods == 0 {
        return Err(Error::BalancedPanel("N and T must be positive".into()));
    }
    if let Some(tps) = &truth.transitions {
        // Boundary values are allowed for generation; TransitionPair
        // construction already rejects anything outside [0, 1].
        if tps.iter().any(|tp| !(tp.p01() + tp.p10() > 0.0)) {
            return Err(Error::ParamDomain("degenerate transition pair".into()));
        }
    }
    let names = covgen.names();
    truth.validate(spec, names.len() + 1, n_segments)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = n_segments * n_periods;
    let covariates: Vec<Vec<f64>> = match covgen {
        CovariateRule::StandardNormal { n_covariates } => (0..cells)
            .map(|_| (0..*n_covariates).map(|_| rng.sample(StandardNormal)).collect())
            .collect(),
        CovariateRule::Fixed(d) => {
            if d.n_segments() != n_segments || d.n_periods() != n_periods {
                return Err(Error::Schema("fixed covariates have a different panel shape".into()));
            }
            (0..cells).map(|c| d.x_cell(c)[1..].to_vec()).collect()
        }
        CovariateRule::Custom { draw, names } => {
            let mut out = Vec::with_capacity(cells);
            for n in 0..n_segments {
                for t in 0..n_periods {
                    let v = draw(n, t, &mut rng);
                    if v.len() != names.len() {
                        return Err(Error::Schema("covariate rule returned the wrong length".into()));
                    }
                    out.push(v);
                }
            }
            out
        }
    };
    let template = PanelData::from_parts(n_segments, n_periods, vec![0; cells], covariates, names)?;
    let (counts, states) = simulate_counts(spec, truth, &template, &mut rng);
    let data = template.with_counts(counts)?;
    Ok((data, StateMatrix::from_vec(n_segments, n_periods, states)?))
}

/// Frequency table of counts, used by reports.
pub fn count_histogram(data: &PanelData) -> BTreeMap<u64, usize> {
    let mut h = BTreeMap::new();
    for &a in data.counts() {
        *h.entry(a).or_insert(0) += 1;
    }
    h
}
