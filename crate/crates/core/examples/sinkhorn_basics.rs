// Entropic OT on a small random problem, compared with the exact LP optimum
// as the regularization shrinks.

use jcpot::ot::{entropy, exact_ot_oracle, sinkhorn, squared_euclidean_cost, DiscreteMeasure, SinkhornParams};
use jcpot::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Array2::from_shape_fn((6, 2), |_| rng.random::<f64>());
    let y = Array2::from_shape_fn((6, 2), |_| rng.random::<f64>() + 0.5);
    let mu = DiscreteMeasure::uniform(x)?;
    let nu = DiscreteMeasure::uniform(y)?;
    let cost = squared_euclidean_cost(mu.support(), nu.support())?;

    let exact = exact_ot_oracle(mu.mass(), nu.mass(), &cost)?;
    println!("exact optimum: {exact:.6}");

    // epsilon is relative to the largest cost entry
    for epsilon in [1.0, 0.1, 0.01, 0.001] {
        let params = SinkhornParams {
            epsilon,
            tol: 1e-9,
            max_iter: 50_000,
        };
        let out = sinkhorn(&mu, &nu, &cost, &params)?;
        let plan = out.coupling.values();
        let value = jcpot::ot::transport_cost(plan, &cost)?;
        println!(
            "eps {epsilon:>6}: cost {value:.6} (gap {:+.2e}), entropy {:.3}, {} iterations, converged {}",
            value - exact,
            entropy(plan),
            out.iterations,
            out.converged
        );
        assert!(value >= exact - 1e-9);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
