//! Simulation-based chi-square goodness of fit: the true parameters against
//! a model whose rates are ten times too large.

use switchcount::cli::default_truth;
use switchcount::gof::gof_pvalue;
use switchcount::model::{Family, ModelSpec, Structure};
use switchcount::panel::{simulate_panel, CovariateRule};

fn main() -> switchcount::Result<()> {
    let spec = ModelSpec::new(Family::NegativeBinomial, Structure::ZeroInflatedTau);
    let truth = default_truth(&spec, 2, 100)?;
    let (data, _) = simulate_panel(&spec, &truth, &CovariateRule::StandardNormal { n_covariates: 2 }, 100, 5, 3)?;

    let mut wrong = truth.clone();
    wrong.beta[0] += 10f64.ln();
    for (label, params) in [("true", &truth), ("rates x10", &wrong)] {
        let g = gof_pvalue(&data, &spec, params, 999, 1)?;
        println!("{label:>10}: chi2 {:8.2}  p {:.4}  cells {}", g.chi2_observed, g.p_value, g.cell_edges.n_cells());
        for (c, (o, e)) in g.observed_cell_counts.iter().zip(&g.expected_cell_counts).enumerate() {
            println!("            from {:>3}: observed {o:5} expected {e:8.2}", g.cell_edges.lower[c]);
        }
    }
    Ok(())
}
