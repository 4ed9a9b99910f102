// Writing a scenario to CSV, reading it back and fitting from the files, as
// the command-line tool does.

use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::io::{load_labeled_csv, load_sources, source_file_name, write_scenario, TARGET_FILE};
use jcpot::{jcpot_fit, JcpotProblem, Result};

pub fn run() -> Result<()> {
    let params = ScenarioParams {
        num_sources: 2,
        n_source: 80,
        n_target: 60,
        ..Default::default()
    };
    let scenario = gen_multisource_scenario(&params, 1)?;
    let dir = std::env::temp_dir().join(format!("jcpot-example-{}", std::process::id()));
    write_scenario(&dir, &scenario)?;

    let paths: Vec<_> = (0..2).map(|k| dir.join(source_file_name(k))).collect();
    let sources = load_sources(&paths)?;
    let target = load_labeled_csv(&dir.join(TARGET_FILE))?;
    assert!(target.is_unlabeled());
    assert_eq!(sources, scenario.sources);
    assert_eq!(target.points, scenario.target);

    let sol = jcpot_fit(&JcpotProblem::new(sources, target.points, 2))?;
    println!("read back from {}: h_hat = {:?}", dir.display(), sol.h_hat.values());
    std::fs::remove_dir_all(&dir).map_err(|source| jcpot::Error::Io { path: dir, source })?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
