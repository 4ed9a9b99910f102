// A small benchmark over the number of sources, all methods, two repetitions.

use jcpot::harness::config::{GeneratorParams, Method};
use jcpot::harness::{run_benchmark, RunConfig};
use jcpot::Result;

pub fn run() -> Result<()> {
    let config = RunConfig {
        methods: Method::ALL.to_vec(),
        repetitions: 2,
        num_sources: vec![2, 4],
        seed: 42,
        generator: GeneratorParams {
            n_source: 100,
            n_target: 100,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = run_benchmark(&config)?;
    print!("{}", report.summary_csv());
    for e in &report.errors {
        println!(
            "failed: K = {} rep {} {}: {}",
            e.num_sources, e.repetition, e.method, e.message
        );
    }

    // the body is deterministic; timings are kept apart
    let again = run_benchmark(&config)?;
    assert_eq!(report.body_json(), again.body_json());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
