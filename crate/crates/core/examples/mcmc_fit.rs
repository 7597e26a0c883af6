//! Posterior sampling for a Markov switching negative binomial model on a
//! synthetic panel, with credible intervals for every parameter.

use std::time::Instant;

use switchcount::markov::TransitionPair;
use switchcount::mcmc::{sample_posterior, McmcConfig, PriorConfig};
use switchcount::model::{ModelSpec, ParamSet};
use switchcount::panel::{simulate_panel, CovariateRule};
use switchcount::stats::quantile;

fn main() -> switchcount::Result<()> {
    let spec = ModelSpec::msnb();
    let n = 100;
    let transitions = (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            TransitionPair::new(0.2 + 0.6 * u, 0.8 - 0.6 * u)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let truth = ParamSet::new(vec![0.5, 0.4, -0.3])
        .with_alpha(0.15)
        .with_transitions(transitions);
    let covs = CovariateRule::StandardNormal { n_covariates: 2 };
    let (data, _) = simulate_panel(&spec, &truth, &covs, n, 5, 11)?;

    let sweeps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let cfg = McmcConfig {
        n_draws: sweeps,
        n_burnin: sweeps / 4,
        ..McmcConfig::default()
    };
    let started = Instant::now();
    let draws = sample_posterior(&spec, &data, &PriorConfig::default(), &cfg)?;
    println!("{} chains x {} sweeps in {:.1?}", cfg.n_chains, sweeps, started.elapsed());

    for (j, name) in draws.names.iter().enumerate() {
        let v = draws.pooled_param(j);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        println!("{name:>16} {m:8.4} [{:8.4}, {:8.4}]", quantile(&v, 0.025), quantile(&v, 0.975));
    }
    for (c, chain) in draws.chains.iter().enumerate() {
        println!("chain {c}: accept {:.2?} transitions {:.2}", chain.accept_rate, chain.transition_accept_rate);
    }
    Ok(())
}
