//! Repeated runs of the requested methods over a sweep of source counts.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::adaptation::{
    class_mass_leakage, jcpot_lp, jcpot_pt, nearest_neighbor_labels, otda_baseline, OtdaOutput, Prediction,
};
use crate::data::LabeledDataset;
use crate::datagen::{gen_multisource_scenario, stream_rng};
use crate::error::{Error, ErrorKind, Result};
use crate::harness::config::{DataPaths, Method, RunConfig};
use crate::harness::io::{load_labeled_csv, load_sources};
use crate::harness::metrics::{accuracy, l1_proportion_error, mean_std};
use crate::harness::report::{BenchEntry, ErrorRecord, Report, RunRecord, StageTiming, SCHEMA_VERSION};
use crate::jcpot::{jcpot_fit, JcpotProblem, JcpotSolution};

/// Fraction of each target class used for training by `target-only`.
pub const TARGET_ONLY_TRAIN_FRACTION: f64 = 0.8;
const SPLIT_STREAM: u64 = 1 << 32;

/// Per-repetition seed: splitmix64 of the master seed offset by the repetition.
pub fn derive_seed(master: u64, repetition: usize) -> u64 {
    let mut z = master.wrapping_add((repetition as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One problem instance with held-out target truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sources: Vec<LabeledDataset>,
    pub target: Array2<f64>,
    pub truth: Vec<usize>,
    pub num_classes: usize,
}

impl Instance {
    pub fn true_proportions(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.num_classes];
        for &y in &self.truth {
            p[y] += 1.0;
        }
        let n = self.truth.len() as f64;
        p.iter().map(|c| c / n).collect()
    }
}

/// Loads CSV sources and target; truth comes from `target_truth` or from the
/// target's own labels.
pub fn load_instance(paths: &DataPaths) -> Result<Instance> {
    if paths.sources.is_empty() {
        return Err(Error::Config("data.sources is empty".into()));
    }
    let sources = load_sources(&paths.sources)?;
    let target = load_labeled_csv(&paths.target)?;
    let (truth_path, truth_file) = match &paths.target_truth {
        Some(p) => (p.as_path(), load_labeled_csv(p)?),
        None => (paths.target.as_path(), target.clone()),
    };
    if truth_file.labels.len() != target.labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} has {} rows but the target has {}",
            truth_path.display(),
            truth_file.labels.len(),
            target.labels.len()
        )));
    }
    let truth = truth_file.into_labeled(truth_path)?.labels;
    let num_classes = sources
        .iter()
        .map(LabeledDataset::inferred_num_classes)
        .chain(truth.iter().map(|y| y + 1))
        .max()
        .unwrap_or(0);
    Ok(Instance {
        sources,
        target: target.points,
        truth,
        num_classes,
    })
}

fn generated_instance(config: &RunConfig, num_sources: usize, seed: u64) -> Result<Instance> {
    let s = gen_multisource_scenario(&config.generator.scenario(num_sources), seed)?;
    let num_classes = s.num_classes();
    Ok(Instance {
        sources: s.sources,
        target: s.target,
        truth: s.truth.labels,
        num_classes,
    })
}

/// Stratified split of `0..labels.len()` into (train, test), both sorted.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = stream_rng(seed, SPLIT_STREAM);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..num_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

struct RepOutcome {
    runs: Vec<(Method, RunRecord)>,
    errors: Vec<ErrorRecord>,
    timings: Vec<StageTiming>,
}

struct Rep<'a> {
    config: &'a RunConfig,
    num_sources: usize,
    repetition: usize,
    seed: u64,
}

struct Clock {
    num_sources: usize,
    repetition: usize,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            num_sources: self.num_sources,
            repetition: self.repetition,
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

impl Rep<'_> {
    fn error(&self, method: Method, f: &Failure) -> ErrorRecord {
        ErrorRecord {
            num_sources: self.num_sources,
            repetition: self.repetition,
            method,
            kind: f.kind,
            message: f.message.clone(),
        }
    }

    fn record(&self, inst: &Instance, predictions: Vec<usize>) -> Result<RunRecord> {
        Ok(RunRecord {
            repetition: self.repetition,
            seed: self.seed,
            accuracy: accuracy(&predictions, &inst.truth)?,
            predictions,
            true_labels: inst.truth.clone(),
            evaluated_indices: None,
            true_proportions: inst.true_proportions(),
            h_hat: None,
            l1_error: None,
            iterations: None,
            converged: None,
            h_trace: None,
            class_mass_leakage: None,
            unlabeled: Vec::new(),
        })
    }

    fn jcpot_record(&self, inst: &Instance, sol: &JcpotSolution, pred: Prediction) -> Result<RunRecord> {
        let mut leakage = 0.0;
        for ((g, src), l) in sol.couplings.iter().zip(&inst.sources).zip(&sol.lambda) {
            leakage += l * class_mass_leakage(g, &src.labels, &inst.truth)?;
        }
        let h_true = inst.true_proportions();
        let unlabeled = pred.scores.unlabeled().to_vec();
        Ok(RunRecord {
            h_hat: Some(sol.h_hat.values().to_vec()),
            l1_error: Some(l1_proportion_error(sol.h_hat.values(), &h_true)?),
            iterations: Some(sol.iterations),
            converged: Some(sol.converged),
            h_trace: Some(sol.h_trace.clone()),
            class_mass_leakage: Some(leakage),
            unlabeled,
            ..self.record(inst, pred.labels)?
        })
    }

    fn otda_record(
        &self,
        inst: &Instance,
        merged: &LabeledDataset,
        out: &OtdaOutput,
        pred: &Prediction,
    ) -> Result<RunRecord> {
        Ok(RunRecord {
            iterations: Some(out.transport.iterations),
            converged: Some(out.transport.converged),
            class_mass_leakage: Some(class_mass_leakage(
                &out.transport.coupling,
                &merged.labels,
                &inst.truth,
            )?),
            unlabeled: pred.scores.unlabeled().to_vec(),
            ..self.record(inst, pred.labels.clone())?
        })
    }

    fn target_only(&self, inst: &Instance) -> Result<RunRecord> {
        let (train, test) = stratified_split(&inst.truth, TARGET_ONLY_TRAIN_FRACTION, self.seed);
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidInput("target too small for an 80/20 split".into()));
        }
        let train_points = inst.target.select(Axis(0), &train);
        let train_labels: Vec<usize> = train.iter().map(|&i| inst.truth[i]).collect();
        let test_points = inst.target.select(Axis(0), &test);
        let test_labels: Vec<usize> = test.iter().map(|&i| inst.truth[i]).collect();
        let predictions = nearest_neighbor_labels(train_points.view(), &train_labels, test_points.view())?;
        Ok(RunRecord {
            accuracy: accuracy(&predictions, &test_labels)?,
            predictions,
            true_labels: test_labels,
            evaluated_indices: Some(test),
            ..self.record(inst, vec![0; inst.truth.len()])?
        })
    }

    fn run(self, data: Option<&Instance>) -> RepOutcome {
        let config = self.config;
        let mut clock = Clock {
            num_sources: self.num_sources,
            repetition: self.repetition,
            timings: Vec::new(),
        };
        let methods = &config.methods;
        let mut runs = Vec::new();
        let mut errors = Vec::new();

        let instance = match data {
            Some(inst) => Ok(inst.clone()),
            None => {
                let (k, seed) = (self.num_sources, self.seed);
                clock.timed("generate", || generated_instance(config, k, seed))
            }
        };
        let inst = match instance {
            Ok(inst) => inst,
            Err(e) => {
                let f = Failure::from(e);
                errors.extend(methods.iter().map(|&m| self.error(m, &f)));
                return RepOutcome {
                    runs,
                    errors,
                    timings: clock.timings,
                };
            }
        };

        let jcpot = methods.iter().any(|m| m.is_jcpot()).then(|| {
            let mut problem = JcpotProblem::new(inst.sources.clone(), inst.target.clone(), inst.num_classes)
                .with_epsilon(config.epsilon)
                .with_tol(config.tol)
                .with_max_iter(config.max_iter);
            if let Some(w) = config.lambda.weights() {
                problem = problem.with_lambda(w);
            }
            clock.timed("jcpot", || jcpot_fit(&problem)).map_err(Failure::from)
        });
        let merged = LabeledDataset::concat(&inst.sources).map_err(Failure::from);
        let otda = methods.iter().any(|m| m.is_otda()).then(|| {
            let merged = merged.as_ref().map_err(Clone::clone)?;
            clock
                .timed("otda", || {
                    otda_baseline(merged, inst.num_classes, inst.target.view(), &config.sinkhorn_params())
                })
                .map_err(Failure::from)
        });

        for &method in methods {
            let stage = method.name();
            let outcome: std::result::Result<RunRecord, Failure> = match method {
                Method::JcpotLp | Method::JcpotPt => {
                    let sol = jcpot.as_ref().expect("fitted").as_ref().map_err(Clone::clone);
                    sol.and_then(|sol| {
                        clock
                            .timed(stage, || {
                                let pred = if method == Method::JcpotLp {
                                    jcpot_lp(sol)
                                } else {
                                    jcpot_pt(sol, &inst.sources, inst.target.view())
                                };
                                pred.and_then(|p| self.jcpot_record(&inst, sol, p))
                            })
                            .map_err(Failure::from)
                    })
                }
                Method::OtdaLp | Method::OtdaPt => {
                    let out = otda.as_ref().expect("fitted").as_ref().map_err(Clone::clone);
                    out.and_then(|out| {
                        let merged = merged.as_ref().map_err(Clone::clone)?;
                        let pred = if method == Method::OtdaLp { &out.lp } else { &out.pt };
                        self.otda_record(&inst, merged, out, pred).map_err(Failure::from)
                    })
                }
                Method::NoAdapt => merged.as_ref().map_err(Clone::clone).and_then(|merged| {
                    clock
                        .timed(stage, || {
                            nearest_neighbor_labels(merged.points(), &merged.labels, inst.target.view())
                                .and_then(|p| self.record(&inst, p))
                        })
                        .map_err(Failure::from)
                }),
                Method::TargetOnly => clock.timed(stage, || self.target_only(&inst)).map_err(Failure::from),
            };
            match outcome {
                Ok(r) => runs.push((method, r)),
                Err(f) => errors.push(self.error(method, &f)),
            }
        }
        RepOutcome {
            runs,
            errors,
            timings: clock.timings,
        }
    }
}

/// An error reduced to what the report keeps.
#[derive(Debug, Clone)]
struct Failure {
    kind: ErrorKind,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

/// Runs every (K, repetition) pair, possibly in parallel, and assembles the
/// report. Solver failures become [`ErrorRecord`]s; only configuration and
/// input-loading problems are returned as errors.
pub fn run_benchmark(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let data = config.data.as_ref().map(load_instance).transpose()?;
    let sweep = config.sweep();

    let jobs: Vec<(usize, usize)> = sweep
        .iter()
        .flat_map(|&k| (0..config.repetitions).map(move |r| (k, r)))
        .collect();
    let outcomes: Vec<RepOutcome> = jobs
        .par_iter()
        .map(|&(num_sources, repetition)| {
            Rep {
                config,
                num_sources,
                repetition,
                seed: derive_seed(config.seed, repetition),
            }
            .run(data.as_ref())
        })
        .collect();

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut timings = Vec::new();
    let mut per_job: Vec<(usize, Vec<(Method, RunRecord)>)> = Vec::new();
    for (&(k, _), o) in jobs.iter().zip(outcomes) {
        errors.extend(o.errors);
        timings.extend(o.timings);
        per_job.push((k, o.runs));
    }
    for &k in &sweep {
        for &method in &config.methods {
            let runs: Vec<RunRecord> = per_job
                .iter()
                .filter(|(jk, _)| *jk == k)
                .flat_map(|(_, runs)| runs.iter().filter(|(m, _)| *m == method).map(|(_, r)| r.clone()))
                .collect();
            if runs.is_empty() {
                continue;
            }
            let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&acc);
            let l1: Vec<f64> = runs.iter().filter_map(|r| r.l1_error).collect();
            let (mean_l1, std_l1) = mean_std(&l1);
            let has_l1 = !l1.is_empty();
            entries.push(BenchEntry {
                num_sources: k,
                method,
                mean_accuracy,
                std_accuracy,
                mean_l1_error: has_l1.then_some(mean_l1),
                std_l1_error: has_l1.then_some(std_l1),
                runs,
            });
        }
    }
    for e in &errors {
        log::warn!(
            "K = {}, repetition {}, {}: {} ({:?})",
            e.num_sources,
            e.repetition,
            e.method,
            e.message,
            e.kind
        );
    }
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        entries,
        errors,
        timings,
    })
}

/// Writes `report.json` (deterministic body), `timings.json` and `summary.csv`.
pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, body) in [
        ("report.json", report.body_json()),
        ("timings.json", report.timings_json()),
        ("summary.csv", report.summary_csv()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::GeneratorParams;

    fn small(methods: Vec<Method>) -> RunConfig {
        RunConfig {
            methods,
            repetitions: 2,
            num_sources: vec![2],
            generator: GeneratorParams {
                n_source: 60,
                n_target: 50,
                separation: 5.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_pure_and_distinct() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        let seeds: std::collections::HashSet<u64> = (0..100).map(|r| derive_seed(7, r)).collect();
        assert_eq!(seeds.len(), 100);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 10)).collect();
        let (train, test) = stratified_split(&labels, 0.8, 3);
        assert_eq!(train.len(), 40);
        assert_eq!(test.len(), 10);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 2);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(stratified_split(&labels, 0.8, 3), (train, test));
    }

    #[test]
    fn every_method_reports() {
        let report = run_benchmark(&small(Method::ALL.to_vec())).unwrap();
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert_eq!(report.entries.len(), Method::ALL.len());
        for e in &report.entries {
            assert_eq!(e.runs.len(), 2);
            for r in &e.runs {
                assert!((0.0..=1.0).contains(&r.accuracy));
                assert_eq!(accuracy(&r.predictions, &r.true_labels).unwrap(), r.accuracy);
                if let Some(l1) = r.l1_error {
                    assert!((0.0..=2.0).contains(&l1));
                }
            }
        }
        let jl = report.entry(2, Method::JcpotLp).unwrap();
        assert!(jl.mean_l1_error.is_some());
        assert!(report.entry(2, Method::NoAdapt).unwrap().mean_l1_error.is_none());
        let to = &report.entry(2, Method::TargetOnly).unwrap().runs[0];
        assert_eq!(to.predictions.len(), 10);
        assert!(!report.timings.is_empty());
    }

    #[test]
    fn solver_errors_are_recorded() {
        let mut config = small(vec![Method::JcpotLp, Method::NoAdapt]);
        config.epsilon = 1e-6;
        let report = run_benchmark(&config).unwrap();
        assert_eq!(report.errors.len(), 2);
        assert!(report.errors.iter().all(|e| e.method == Method::JcpotLp));
        assert_eq!(report.errors[0].kind, crate::error::ErrorKind::Numerical);
        assert_eq!(report.entries.len(), 1);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut config = small(vec![Method::JcpotLp]);
        config.repetitions = 0;
        assert!(matches!(run_benchmark(&config), Err(Error::Config(_))));
    }
}
