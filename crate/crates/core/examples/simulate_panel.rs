//! Simulates a switching panel, writes it as CSV, reads it back and prints
//! covariate summaries and the count histogram.

use switchcount::cli::default_truth;
use switchcount::model::ModelSpec;
use switchcount::panel::{count_histogram, load_panel, simulate_panel, summarize, write_panel, CovariateRule, CsvSchema};

fn main() -> switchcount::Result<()> {
    let spec = ModelSpec::msnb();
    let truth = default_truth(&spec, 2, 50)?;
    let (data, states) = simulate_panel(&spec, &truth, &CovariateRule::StandardNormal { n_covariates: 2 }, 50, 5, 1)?;

    let mut csv = Vec::new();
    write_panel(&data, &mut csv)?;
    let back = load_panel(csv.as_slice(), &CsvSchema::default())?;
    assert_eq!(back, data);
    println!("{} segments x {} periods, {} bytes of CSV", data.n_segments(), data.n_periods(), csv.len());

    for s in summarize(&data) {
        println!("{:>4}: mean {:6.3} sd {:5.3} min {:6.3} median {:6.3} max {:6.3}", s.name, s.mean, s.sd, s.min, s.median, s.max);
    }
    let zero_state = states.as_slice().iter().filter(|s| **s == 0).count();
    println!("cells in the zero state: {zero_state} of {}", data.n_cells());
    for (count, n) in count_histogram(&data) {
        println!("count {count:>3}: {n}");
    }
    Ok(())
}
