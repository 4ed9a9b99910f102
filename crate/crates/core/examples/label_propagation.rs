// Target labels read off the couplings, with and without proportion
// estimation, against plain 1-NN on the sources.

use jcpot::adaptation::{jcpot_lp, nearest_neighbor_labels, otda_baseline};
use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::metrics::accuracy;
use jcpot::ot::SinkhornParams;
use jcpot::{jcpot_fit, JcpotProblem, LabeledDataset, Result};

pub fn run() -> Result<()> {
    let params = ScenarioParams {
        num_sources: 4,
        n_source: 150,
        n_target: 200,
        ..Default::default()
    };
    let s = gen_multisource_scenario(&params, 5)?;
    let truth = &s.truth.labels;

    let sol = jcpot_fit(&JcpotProblem::new(s.sources.clone(), s.target.clone(), 2))?;
    let lp = jcpot_lp(&sol)?;
    println!("jcpot-lp   accuracy {:.3}", accuracy(&lp.labels, truth)?);
    if !lp.scores.unlabeled().is_empty() {
        println!("  {} target points got no label mass", lp.scores.unlabeled().len());
    }

    // plain OT between the pooled sources and the target ignores the shift
    let merged = LabeledDataset::concat(&s.sources)?;
    let otda = otda_baseline(&merged, 2, s.target.view(), &SinkhornParams::default())?;
    println!("otda-lp    accuracy {:.3}", accuracy(&otda.lp.labels, truth)?);

    let nn = nearest_neighbor_labels(merged.points(), &merged.labels, s.target.view())?;
    println!("no-adapt   accuracy {:.3}", accuracy(&nn, truth)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
