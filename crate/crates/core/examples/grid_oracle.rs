// Brute-force check that the solver finds the minimizer of the summed
// entropic transport objective over two-class proportions.

use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::oracle::{simplex_grid_oracle, OracleParams};
use jcpot::{jcpot_fit, JcpotProblem, Result};

pub fn run() -> Result<()> {
    let params = ScenarioParams {
        num_sources: 2,
        n_source: 120,
        n_target: 100,
        separation: 5.0,
        ..Default::default()
    };
    let s = gen_multisource_scenario(&params, 2)?;
    let oracle = simplex_grid_oracle(
        &s.sources,
        s.target.view(),
        &OracleParams {
            step: 0.02,
            ..Default::default()
        },
    )?;
    let best = oracle
        .points
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("grid is not empty");
    println!(
        "grid argmin pi = {:.2} (objective {:.4})",
        oracle.argmin[0], best.objective
    );
    for skipped in &oracle.skipped {
        println!("skipped pi = {}: {}", skipped.pi, skipped.reason);
    }

    let sol = jcpot_fit(&JcpotProblem::new(s.sources.clone(), s.target.clone(), 2))?;
    println!(
        "solver h_hat = {:.4}, true = {:.4}",
        sol.h_hat[0], s.truth.proportions[0]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
