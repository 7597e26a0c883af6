//! Maximum likelihood for the zero-inflated negative binomial variants,
//! with Wald intervals, significance flags and AIC.

use switchcount::cli::default_truth;
use switchcount::mle::{confidence_interval, fit_mle, t_test};
use switchcount::model::{Family, ModelSpec, Structure};
use switchcount::optim::OptimOptions;
use switchcount::panel::{simulate_panel, CovariateRule};

fn main() -> switchcount::Result<()> {
    let covs = CovariateRule::StandardNormal { n_covariates: 2 };
    for structure in [Structure::ZeroInflatedTau, Structure::ZeroInflatedGamma] {
        let spec = ModelSpec::new(Family::NegativeBinomial, structure);
        let truth = default_truth(&spec, 2, 200)?;
        let (data, _) = simulate_panel(&spec, &truth, &covs, 200, 5, 2)?;
        let fit = fit_mle(&spec, &data, None, &OptimOptions::default())?;
        println!(
            "{}: LL {:.2}  AIC {:.2}  converged {}  iterations {}",
            spec.name(),
            fit.max_loglik,
            fit.aic,
            fit.converged,
            fit.iterations
        );
        let ci = confidence_interval(&fit, 0.95)?;
        let sig = t_test(&fit, 0.05)?;
        for (((name, est), (lo, hi)), s) in fit.names.iter().zip(&fit.estimate_vector).zip(&ci).zip(&sig) {
            println!("  {name:>16} {est:8.4} [{lo:8.4}, {hi:8.4}]{}", if *s { " *" } else { "" });
        }
    }
    Ok(())
}
