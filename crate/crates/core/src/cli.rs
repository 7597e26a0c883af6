//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 2 on usage errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{mpsrf, psrf, ConvergenceReport, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::markov::TransitionPair;
use crate::mcmc::{sample_posterior, unpack_bits, ChainDraws, McmcConfig, PriorConfig, StateStorage};
use crate::mle::fit_mle;
use crate::model::{ModelSpec, ParamSet, Structure};
use crate::optim::OptimOptions;
use crate::panel::{load_panel, simulate_panel, write_panel, CovariateRule, CsvSchema, PanelData};
use crate::report::{mcmc_report, mle_report, write_histogram_csv, write_state_series_csv, FitReport, ReportOptions};
use crate::select::bayes_log_factor;

pub const THREADS_ENV: &str = "SWITCHCOUNT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "switchcount", version, about = "Markov switching and zero-inflated count models for panel data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic panel with known parameters.
    Simulate(SimulateArgs),
    /// Fit a model by maximum likelihood or MCMC.
    Fit(FitArgs),
    /// Goodness of fit of a stored report's point estimate.
    Gof(GofArgs),
    /// Bayes log-factor of two fit reports (second minus first).
    Compare(CompareArgs),
    /// Convergence diagnostics of stored chain draws.
    Diagnose(DiagnoseArgs),
    /// Write state-series and histogram CSV extracts of a fit report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mle,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StoreStates {
    Freq,
    Full,
}

fn parse_model(s: &str) -> std::result::Result<ModelSpec, String> {
    s.parse::<ModelSpec>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_model, default_value = "msnb")]
    model: ModelSpec,
    #[arg(long, default_value_t = 100)]
    segments: usize,
    #[arg(long, default_value_t = 5)]
    periods: usize,
    /// Number of standard-normal covariates besides the intercept.
    #[arg(long, default_value_t = 2)]
    covariates: usize,
    /// JSON parameter set; defaults to a built-in truth.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ModelSpec,
    #[arg(long, value_enum, default_value = "mcmc")]
    method: Method,
    /// JSON file with optional `mcmc`, `priors` and `report` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gof_reps: Option<usize>,
    #[arg(long)]
    psrf_threshold: Option<f64>,
    #[arg(long, value_enum)]
    store_states: Option<StoreStates>,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    gof_reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Columnar draws file written by `fit --method mcmc`.
    #[arg(long)]
    draws: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    psrf_threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub mcmc: McmcConfig,
    pub priors: PriorConfig,
    pub report: ReportOptions,
    pub optim: Option<OptimSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimSettings {
    pub grad_tol: f64,
    pub max_evals: usize,
    pub multistart: usize,
}

impl Default for OptimSettings {
    fn default() -> Self {
        let o = OptimOptions::default();
        Self { grad_tol: o.grad_tol, max_evals: o.max_evals, multistart: o.multistart }
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parameters used by `simulate` when no truth file is given: `β` of
/// `0.5, 0.4, −0.3, 0.2, …`, `α = 0.15`, `τ = −1`, `γ` of `−0.5, 0.5, …`
/// and transitions spread evenly over `[0.2, 0.8]`.
pub fn default_truth(spec: &ModelSpec, n_covariates: usize, n_segments: usize) -> Result<ParamSet> {
    let k = n_covariates + 1;
    let beta: Vec<f64> = (0..k)
        .map(|i| match i {
            0 => 0.5,
            _ if i % 2 == 1 => 0.4 / i.div_ceil(2) as f64,
            _ => -0.3 / (i / 2) as f64,
        })
        .collect();
    let mut p = ParamSet::new(beta);
    if spec.is_negbin() {
        p = p.with_alpha(0.15);
    }
    match spec.structure {
        Structure::ZeroInflatedTau => p = p.with_tau(-1.0),
        Structure::ZeroInflatedGamma => {
            let g = spec.gamma_indices(k).iter().map(|&i| if i == 0 { -0.5 } else { 0.5 }).collect();
            p = p.with_gamma(g);
        }
        Structure::MarkovSwitching => {
            let tps = (0..n_segments)
                .map(|n| {
                    let u = if n_segments > 1 { n as f64 / (n_segments - 1) as f64 } else { 0.5 };
                    TransitionPair::new(0.2 + 0.6 * u, 0.8 - 0.6 * u)
                })
                .collect::<Result<Vec<_>>>()?;
            p = p.with_transitions(tps);
        }
        Structure::Standard => {}
    }
    Ok(p)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_data(path: &Path) -> Result<PanelData> {
    load_panel(BufReader::new(File::open(path)?), &CsvSchema::default())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let truth = match &args.truth {
        Some(p) => read_json(p)?,
        None => default_truth(&args.model, args.covariates, args.segments)?,
    };
    let covs = CovariateRule::StandardNormal { n_covariates: args.covariates };
    let (data, states) = simulate_panel(&args.model, &truth, &covs, args.segments, args.periods, args.seed)?;
    fs::create_dir_all(&args.out)?;
    write_panel(&data, BufWriter::new(File::create(args.out.join("panel.csv"))?))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(args.out.join("states.csv"))?));
    w.write_record(["segment_id", "period", "state"])?;
    for n in 0..data.n_segments() {
        for t in 0..data.n_periods() {
            w.write_record([&data.segment_ids()[n], &data.period_ids()[t], &states.get(n, t).to_string()])?;
        }
    }
    w.flush()?;
    write_json(&args.out.join("truth.json"), &truth)?;
    println!("wrote {} cells to {}", data.n_cells(), args.out.display());
    Ok(())
}

/// Writes one row per retained draw: chain, draw index, continuous
/// parameters, per-segment transitions and the integrated log-likelihood.
pub fn write_draws_csv<W: Write>(draws: &ChainDraws, sink: W) -> Result<()> {
    let (names, chains) = draws.diagnostic_matrices();
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["chain".to_string(), "draw".into()];
    header.extend(names);
    header.push("loglik".into());
    w.write_record(&header)?;
    for (j, (rows, chain)) in chains.iter().zip(&draws.chains).enumerate() {
        for (i, row) in rows.iter().enumerate() {
            let mut rec = vec![j.to_string(), i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(chain.loglik[i].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_states(draws: &ChainDraws, data: &PanelData, dir: &Path) -> Result<()> {
    let t_len = data.n_periods();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("state_freq.csv"))?));
    w.write_record(["chain", "segment_id", "period", "freq", "retained"])?;
    for (j, c) in draws.chains.iter().enumerate() {
        for (cell, f) in c.state_freq.iter().enumerate() {
            w.write_record([
                &j.to_string(),
                &data.segment_ids()[cell / t_len],
                &data.period_ids()[cell % t_len],
                &f.to_string(),
                &c.loglik.len().to_string(),
            ])?;
        }
    }
    w.flush()?;
    if draws.chains.iter().any(|c| c.states_full.is_some()) {
        // One row per retained draw; the state matrix is packed into
        // 64-bit words in cell order, written as hex.
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("states_full.csv"))?));
        w.write_record(["chain", "draw", "bits"])?;
        for (j, c) in draws.chains.iter().enumerate() {
            for (i, bits) in c.states_full.iter().flatten().enumerate() {
                let hex: Vec<String> = bits.iter().map(|b| format!("{b:016x}")).collect();
                w.write_record([j.to_string(), i.to_string(), hex.join(":")])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Reads a packed state matrix written to `states_full.csv`.
pub fn parse_state_bits(field: &str, n_cells: usize) -> Result<Vec<u8>> {
    let words = field
        .split(':')
        .map(|h| u64::from_str_radix(h, 16).map_err(|_| Error::Schema(format!("bad state word '{h}'"))))
        .collect::<Result<Vec<u64>>>()?;
    if words.len() * 64 < n_cells {
        return Err(Error::Schema("state bitset is too short".into()));
    }
    Ok(unpack_bits(&words, n_cells))
}

fn fit(args: &FitArgs) -> std::result::Result<(), Failure> {
    if args.method == Method::Mle && args.model.is_switching() {
        return Err(Failure::Usage(format!(
            "maximum likelihood is not available for the switching model {}; use --method mcmc",
            args.model.name()
        )));
    }
    let mut cfg: FitConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.mcmc.seed = s;
        cfg.report.seed = s;
    }
    if let Some(r) = args.gof_reps {
        cfg.report.gof_reps = r;
    }
    if let Some(t) = args.psrf_threshold {
        cfg.report.psrf_threshold = t;
    }
    if let Some(s) = args.store_states {
        cfg.mcmc.store_states = match s {
            StoreStates::Freq => StateStorage::Freq,
            StoreStates::Full => StateStorage::Full,
        };
    }
    let data = load_data(&args.data)?;
    fs::create_dir_all(&args.out)?;
    let report: FitReport = match args.method {
        Method::Mle => {
            let o = cfg.optim.clone().unwrap_or_default();
            let opts = OptimOptions {
                grad_tol: o.grad_tol,
                max_evals: o.max_evals,
                multistart: o.multistart,
                ..OptimOptions::default()
            };
            let result = fit_mle(&args.model, &data, None, &opts)?;
            mle_report(&result, &data, &cfg.report)?
        }
        Method::Mcmc => {
            let draws = sample_posterior(&args.model, &data, &cfg.priors, &cfg.mcmc)?;
            write_draws_csv(&draws, BufWriter::new(File::create(args.out.join("draws.csv"))?))?;
            if args.model.is_switching() {
                write_states(&draws, &data, &args.out)?;
            }
            mcmc_report(&draws, &data, &cfg.report)?
        }
    };
    write_json(&args.out.join("report.json"), &report)?;
    print_summary(&report);
    Ok(())
}

fn print_summary(r: &FitReport) {
    println!("{} ({}), {} x {} panel", r.model, r.method, r.n_segments, r.n_periods);
    for p in &r.parameters {
        println!("  {:<20} {:>10.4}  [{:.4}, {:.4}]", p.name, p.estimate, p.lower, p.upper);
    }
    if let Some(ll) = r.max_loglik {
        println!("  max log-likelihood {ll:.2}, AIC {:.2}", r.aic.unwrap_or(f64::NAN));
    }
    if let Some(e) = &r.evidence {
        println!(
            "  log marginal likelihood {:.2} [{:.2}, {:.2}], DIC {:.2}",
            e.log_ml, e.log_ml_ci.0, e.log_ml_ci.1, e.dic
        );
    }
    if let Some(c) = &r.convergence {
        println!("  max PSRF {:.4}, MPSRF {:.4}{}", c.max_psrf, c.mpsrf, if c.converged { "" } else { " (not converged)" });
    }
    if let Some(g) = &r.gof {
        println!("  chi-square {:.2}, p-value {:.4}", g.chi2_observed, g.p_value);
    }
}

fn gof(args: &GofArgs) -> Result<()> {
    let report: FitReport = read_json(&args.report)?;
    let data = load_data(&args.data)?;
    let g = crate::gof::gof_pvalue(&data, &report.spec, &report.point, args.gof_reps, args.seed)?;
    println!("chi-square {:.4}, p-value {:.6} ({} replications)", g.chi2_observed, g.p_value, g.n_replications);
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("gof.json"), &g)?;
    }
    Ok(())
}

fn log_ml_of(path: &Path) -> Result<f64> {
    let v: serde_json::Value = read_json(path)?;
    v.pointer("/evidence/log_ml")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Schema(format!("{} has no evidence.log_ml", path.display())))
}

fn compare(args: &CompareArgs) -> Result<()> {
    let a = log_ml_of(&args.first)?;
    let b = log_ml_of(&args.second)?;
    println!("{:.2}", bayes_log_factor(b, a));
    Ok(())
}

fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(&args.draws)?));
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("chain") || header.get(1) != Some("draw") || header.iter().next_back() != Some("loglik") {
        return Err(Error::Schema("expected chain, draw, ..., loglik columns".into()));
    }
    let names: Vec<String> = header.iter().skip(2).take(header.len() - 3).map(str::to_string).collect();
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let j: usize = rec[0].parse().map_err(|_| Error::Schema("bad chain index".into()))?;
        let row = (2..rec.len() - 1)
            .map(|i| rec[i].parse::<f64>().map_err(|_| Error::Schema(format!("bad value '{}'", &rec[i]))))
            .collect::<Result<Vec<f64>>>()?;
        if chains.len() <= j {
            chains.resize(j + 1, Vec::new());
        }
        chains[j].push(row);
    }
    let per_param = |k: usize| -> Vec<Vec<f64>> { chains.iter().map(|c| c.iter().map(|d| d[k]).collect()).collect() };
    let values = (0..names.len()).map(|k| psrf(&per_param(k))).collect::<Result<Vec<f64>>>()?;
    let joint = mpsrf(&chains)?;
    let max_psrf = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = ConvergenceReport {
        converged: max_psrf <= args.psrf_threshold && joint.value <= args.psrf_threshold,
        names,
        psrf: values,
        max_psrf,
        mpsrf: joint.value,
        mpsrf_regularized: joint.regularized,
        n_chains: chains.len(),
        n_draws_per_chain: chains.first().map_or(0, Vec::len),
        threshold: args.psrf_threshold,
    };
    println!(
        "max PSRF {:.4}, MPSRF {:.4}: {}",
        report.max_psrf,
        report.mpsrf,
        if report.converged { "converged" } else { "not converged" }
    );
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("diagnostics.json"), &report)?;
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let report: FitReport = read_json(&args.report)?;
    let data = load_data(&args.data)?;
    if data.n_segments() != report.n_segments || data.n_periods() != report.n_periods {
        return Err(Error::Schema("data shape does not match the report".into()));
    }
    fs::create_dir_all(&args.out)?;
    write_state_series_csv(&report, &data, BufWriter::new(File::create(args.out.join("state_series.csv"))?))?;
    write_histogram_csv(&report, BufWriter::new(File::create(args.out.join("histogram.csv"))?))?;
    println!("wrote state_series.csv and histogram.csv to {}", args.out.display());
    Ok(())
}

fn configure_threads() -> std::result::Result<(), Failure> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        // A global pool may already exist when called more than once in a
        // process; the first setting wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Gof(a) => gof(a)?,
        Command::Compare(a) => compare(a)?,
        Command::Diagnose(a) => diagnose(a)?,
        Command::Report(a) => report(a)?,
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
