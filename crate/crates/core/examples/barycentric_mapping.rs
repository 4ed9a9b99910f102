// Moving source points onto the target through the estimated couplings and
// classifying with 1-NN.

use jcpot::adaptation::{barycentric_map, jcpot_pt};
use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::metrics::accuracy;
use jcpot::{jcpot_fit, JcpotProblem, Result};
use ndarray::Axis;

pub fn run() -> Result<()> {
    let params = ScenarioParams {
        num_sources: 3,
        n_source: 150,
        n_target: 150,
        separation: 4.0,
        ..Default::default()
    };
    let s = gen_multisource_scenario(&params, 9)?;
    let sol = jcpot_fit(&JcpotProblem::new(s.sources.clone(), s.target.clone(), 2))?;

    let src = &s.sources[0];
    let mapped = barycentric_map(&sol.couplings[0], s.target.view())?;
    println!(
        "source 0: mean {} -> mapped mean {} ({} points without mass)",
        src.points.mean_axis(Axis(0)).unwrap(),
        mapped.points.mean_axis(Axis(0)).unwrap(),
        mapped.dropped.len()
    );

    let pt = jcpot_pt(&sol, &s.sources, s.target.view())?;
    println!("jcpot-pt accuracy {:.3}", accuracy(&pt.labels, &s.truth.labels)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
