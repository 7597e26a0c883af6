//! Forward filtering and smoothing on a single segment, and exact
//! backward sampling of its state path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use switchcount::dists::CountKernel;
use switchcount::markov::{backward_sample, forward, smoothed, stationary, TransitionPair};

fn main() -> switchcount::Result<()> {
    let counts = [0u64, 0, 3, 0, 1, 0, 0];
    let tp = TransitionPair::new(0.3, 0.4)?;
    let kernel = CountKernel::negbin(0.3, 10);
    let log_e1: Vec<f64> = counts.iter().map(|&a| kernel.log_pmf(a, 0.5)).collect();

    let pass = forward(&counts, &log_e1, &tp);
    println!("stationary P(normal) {:.4}", stationary(&tp).pbar1);
    println!("segment log-likelihood {:.6}", pass.loglik);

    let probs = smoothed(&counts, &log_e1, &tp);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut path = vec![0u8; counts.len()];
    let mut freq = vec![0usize; counts.len()];
    let draws = 20_000;
    for _ in 0..draws {
        backward_sample(&pass, &tp, &mut rng, &mut path);
        for (f, s) in freq.iter_mut().zip(&path) {
            *f += usize::from(*s);
        }
    }
    for (t, a) in counts.iter().enumerate() {
        println!("t={t} count {a}  smoothed {:.4}  sampled {:.4}", probs[t], freq[t] as f64 / draws as f64);
    }
    Ok(())
}
