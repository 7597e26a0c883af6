//! Posterior probability of the normal-count state per segment and period,
//! segment categories and the distribution of stationary expectations.

use switchcount::cli::default_truth;
use switchcount::mcmc::{sample_posterior, McmcConfig};
use switchcount::model::ModelSpec;
use switchcount::panel::{simulate_panel, CovariateRule};
use switchcount::report::{mcmc_report, write_histogram_csv, write_state_series_csv, ReportOptions};

fn main() -> switchcount::Result<()> {
    let spec = ModelSpec::msnb();
    let truth = default_truth(&spec, 2, 40)?;
    let (data, states) = simulate_panel(&spec, &truth, &CovariateRule::StandardNormal { n_covariates: 2 }, 40, 5, 5)?;
    let cfg = McmcConfig { n_draws: 4_000, n_burnin: 1_000, ..McmcConfig::default() };
    let draws = sample_posterior(&spec, &data, &Default::default(), &cfg)?;
    let opts = ReportOptions { gof_reps: 199, n_boot: 200, ..ReportOptions::default() };
    let report = mcmc_report(&draws, &data, &opts)?;

    let series = report.state_series.as_ref().expect("switching fits carry a state series");
    for n in 0..5 {
        let p: Vec<String> = (0..data.n_periods()).map(|t| format!("{:.2}", series[n][t])).collect();
        let truth: Vec<String> = states.segment(n).iter().map(|s| s.to_string()).collect();
        println!(
            "segment {n}: counts {:?} P(normal) [{}] true states [{}] {:?}",
            data.segment_counts(n),
            p.join(" "),
            truth.join(" "),
            report.segment_categories.as_ref().map(|c| c[n])
        );
    }

    let mut out = Vec::new();
    write_state_series_csv(&report, &data, &mut out)?;
    println!("state series CSV: {} lines", out.iter().filter(|b| **b == b'\n').count());
    out.clear();
    write_histogram_csv(&report, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out).lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
