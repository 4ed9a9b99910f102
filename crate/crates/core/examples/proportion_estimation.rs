// Estimating the class proportions of an unlabeled target from several
// labeled sources with different class balances.

use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::metrics::l1_proportion_error;
use jcpot::{jcpot_fit, JcpotProblem, Result};

pub fn run() -> Result<()> {
    let params = ScenarioParams {
        num_sources: 5,
        n_source: 200,
        n_target: 200,
        ..Default::default()
    };
    let scenario = gen_multisource_scenario(&params, 3)?;
    for (k, p) in scenario.source_proportions.iter().enumerate() {
        println!("source {k}: class proportions [{:.2}, {:.2}]", p[0], p[1]);
    }

    let problem = JcpotProblem::new(scenario.sources.clone(), scenario.target.clone(), 2).with_epsilon(0.01);
    let sol = jcpot_fit(&problem)?;
    let truth = &scenario.truth.proportions;
    println!(
        "estimated [{:.3}, {:.3}], true [{:.3}, {:.3}], L1 error {:.4}",
        sol.h_hat[0],
        sol.h_hat[1],
        truth[0],
        truth[1],
        l1_proportion_error(sol.h_hat.values(), truth)?
    );
    println!(
        "{} sweeps, converged {}, last step {:.1e}",
        sol.iterations,
        sol.converged,
        sol.h_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
