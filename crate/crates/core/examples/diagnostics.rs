//! Convergence diagnostics for a short switching-model run: per-parameter
//! PSRF and the multivariate MPSRF.

use switchcount::cli::default_truth;
use switchcount::diagnostics::{convergence_report, DEFAULT_THRESHOLD};
use switchcount::mcmc::{sample_posterior, McmcConfig, PriorConfig};
use switchcount::model::ModelSpec;
use switchcount::panel::{simulate_panel, CovariateRule};

fn main() -> switchcount::Result<()> {
    let spec = ModelSpec::msnb();
    let truth = default_truth(&spec, 2, 60)?;
    let (data, _) = simulate_panel(&spec, &truth, &CovariateRule::StandardNormal { n_covariates: 2 }, 60, 5, 4)?;
    let cfg = McmcConfig { n_draws: 6_000, n_burnin: 1_500, ..McmcConfig::default() };
    let draws = sample_posterior(&spec, &data, &PriorConfig::default(), &cfg)?;

    let report = convergence_report(&draws, DEFAULT_THRESHOLD)?;
    for (name, r) in report.names.iter().zip(&report.psrf).take(8) {
        println!("{name:>16} PSRF {r:.4}");
    }
    println!("... {} quantities in total", report.names.len());
    println!(
        "max PSRF {:.4}  MPSRF {:.4}{}  converged {}",
        report.max_psrf,
        report.mpsrf,
        if report.mpsrf_regularized { " (regularized)" } else { "" },
        report.converged
    );
    Ok(())
}
