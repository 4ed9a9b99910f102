use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use jcpot::adaptation::{jcpot_lp, jcpot_pt, nearest_neighbor_labels, otda_baseline, Decoder, Prediction};
use jcpot::datagen::gen_multisource_scenario;
use jcpot::harness::config::{DataPaths, LambdaSpec, Method, RunConfig};
use jcpot::harness::io::{load_labeled_csv, load_sources, write_predictions_csv, write_scenario};
use jcpot::harness::oracle::{simplex_grid_oracle, OracleParams};
use jcpot::harness::{run_benchmark, write_report};
use jcpot::{jcpot_fit, Error, JcpotProblem, JcpotSolution, LabeledDataset, Result};

/// Exit status when `--strict` is set and a solver hit `max_iter`.
const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Parser)]
#[command(name = "jcpot", version, about = "Multi-source domain adaptation under target shift")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario as CSV files.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        generator: GeneratorFlags,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate target class proportions.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        /// Write the estimate as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict target labels with one method.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[arg(long)]
        method: Option<Method>,
        /// Predictions CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep and write report.json, timings.json, summary.csv.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        generator: GeneratorFlags,
        #[command(flatten)]
        data: DataFlags,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Comma-separated source counts to sweep.
        #[arg(long, value_delimiter = ',')]
        num_sources: Option<Vec<usize>>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over two-class target proportions.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `uniform` or comma-separated weights.
    #[arg(long)]
    lambda: Option<LambdaSpec>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 5 if a solver does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct DataFlags {
    /// Labeled source CSV files.
    #[arg(long, num_args = 1..)]
    sources: Vec<PathBuf>,
    /// Target CSV (labels may be -1).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Labeled copy of the target, for evaluation.
    #[arg(long)]
    target_truth: Option<PathBuf>,
}

#[derive(Args)]
struct GeneratorFlags {
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long)]
    n_target: Option<usize>,
    /// Comma-separated target class proportions.
    #[arg(long, value_delimiter = ',')]
    target_prop: Option<Vec<f64>>,
    /// `low,high` range for each source's class-0 proportion.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    prop_range: Option<Vec<f64>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of sources (gen only; bench uses --num-sources).
    #[arg(long)]
    sources_count: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut c.epsilon, self.epsilon);
        set(&mut c.tol, self.tol);
        set(&mut c.max_iter, self.max_iter);
        set(&mut c.lambda, self.lambda.clone());
        set(&mut c.seed, self.seed);
        c.strict |= self.strict;
        Ok(c)
    }
}

impl GeneratorFlags {
    fn apply(&self, c: &mut RunConfig) {
        let g = &mut c.generator;
        set(&mut g.n_source, self.n_source);
        set(&mut g.n_target, self.n_target);
        set(&mut g.target_prop, self.target_prop.clone());
        if let Some(r) = &self.prop_range {
            g.prop_range = [r[0], r[1]];
        }
        set(&mut g.dim, self.dim);
        set(&mut g.separation, self.separation);
        set(&mut g.sigma, self.sigma);
        if let Some(k) = self.sources_count {
            c.num_sources = vec![k];
        }
    }
}

impl DataFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(target) = &self.target {
            c.data = Some(DataPaths {
                sources: self.sources.clone(),
                target: target.clone(),
                target_truth: self.target_truth.clone(),
            });
        } else if !self.sources.is_empty() {
            if let Some(d) = &mut c.data {
                d.sources = self.sources.clone();
            }
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn data_paths(c: &RunConfig) -> Result<&DataPaths> {
    c.data
        .as_ref()
        .ok_or_else(|| Error::Config("--sources and --target (or a [data] table) are required".into()))
}

struct Loaded {
    sources: Vec<LabeledDataset>,
    target: ndarray::Array2<f64>,
    num_classes: usize,
}

fn load_unlabeled(paths: &DataPaths) -> Result<Loaded> {
    if paths.sources.is_empty() {
        return Err(Error::Config("at least one source file is required".into()));
    }
    let sources = load_sources(&paths.sources)?;
    let target = load_labeled_csv(&paths.target)?.points;
    let num_classes = sources
        .iter()
        .map(LabeledDataset::inferred_num_classes)
        .max()
        .unwrap_or(0);
    Ok(Loaded {
        sources,
        target,
        num_classes,
    })
}

fn fit(c: &RunConfig, data: &Loaded) -> Result<JcpotSolution> {
    let mut problem = JcpotProblem::new(data.sources.clone(), data.target.clone(), data.num_classes)
        .with_epsilon(c.epsilon)
        .with_tol(c.tol)
        .with_max_iter(c.max_iter);
    if let Some(w) = c.lambda.weights() {
        problem = problem.with_lambda(w);
    }
    jcpot_fit(&problem)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct FitOutput<'a> {
    h_hat: &'a [f64],
    h_raw: &'a [f64],
    lambda: &'a [f64],
    iterations: usize,
    converged: bool,
    h_trace: &'a [f64],
    target_residuals: &'a [f64],
}

/// `Ok(true)` means everything converged.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { common, generator, out } => {
            let mut c = common.resolve()?;
            generator.apply(&mut c);
            c.validate()?;
            let k = c.num_sources[0];
            let scenario = gen_multisource_scenario(&c.generator.scenario(k), c.seed)?;
            write_scenario(&out, &scenario)?;
            log::info!("wrote {k} sources and a target to {}", out.display());
            Ok(true)
        }
        Command::Fit { common, data, out } => {
            let mut c = common.resolve()?;
            data.apply(&mut c);
            c.validate()?;
            let loaded = load_unlabeled(data_paths(&c)?)?;
            let sol = fit(&c, &loaded)?;
            write_json(
                &FitOutput {
                    h_hat: sol.h_hat.values(),
                    h_raw: &sol.h_raw,
                    lambda: &sol.lambda,
                    iterations: sol.iterations,
                    converged: sol.converged,
                    h_trace: &sol.h_trace,
                    target_residuals: &sol.target_residuals,
                },
                out.as_deref(),
            )?;
            Ok(sol.converged || !c.strict)
        }
        Command::Adapt {
            common,
            data,
            method,
            out,
        } => {
            let mut c = common.resolve()?;
            data.apply(&mut c);
            if let Some(m) = method {
                c.methods = vec![m];
            }
            c.validate()?;
            let [method] = c.methods[..] else {
                return Err(Error::Config("adapt runs exactly one method".into()));
            };
            let loaded = load_unlabeled(data_paths(&c)?)?;
            let (prediction, converged) = match method {
                Method::JcpotLp | Method::JcpotPt => {
                    let sol = fit(&c, &loaded)?;
                    let p = if method == Method::JcpotLp {
                        jcpot_lp(&sol)?
                    } else {
                        jcpot_pt(&sol, &loaded.sources, loaded.target.view())?
                    };
                    (p, sol.converged)
                }
                Method::OtdaLp | Method::OtdaPt => {
                    let merged = LabeledDataset::concat(&loaded.sources)?;
                    let o = otda_baseline(&merged, loaded.num_classes, loaded.target.view(), &c.sinkhorn_params())?;
                    let converged = o.transport.converged;
                    (if method == Method::OtdaLp { o.lp } else { o.pt }, converged)
                }
                Method::NoAdapt => {
                    let merged = LabeledDataset::concat(&loaded.sources)?;
                    let labels = nearest_neighbor_labels(merged.points(), &merged.labels, loaded.target.view())?;
                    (Prediction::from_labels(labels, loaded.num_classes, Decoder::Nn)?, true)
                }
                Method::TargetOnly => {
                    return Err(Error::Config(
                        "target-only needs target labels; use `bench` with a labeled target".into(),
                    ))
                }
            };
            write_predictions_csv(&out, &prediction)?;
            Ok(converged || !c.strict)
        }
        Command::Bench {
            common,
            generator,
            data,
            methods,
            repetitions,
            num_sources,
            out,
        } => {
            let mut c = common.resolve()?;
            generator.apply(&mut c);
            data.apply(&mut c);
            set(&mut c.methods, methods);
            set(&mut c.repetitions, repetitions);
            set(&mut c.num_sources, num_sources);
            let report = run_benchmark(&c)?;
            write_report(&out, &report)?;
            print!("{}", report.summary_csv());
            if let Some(e) = report.errors.first() {
                eprintln!(
                    "{} run(s) failed; first: K = {}, repetition {}, {}: {}",
                    report.errors.len(),
                    e.num_sources,
                    e.repetition,
                    e.method,
                    e.message
                );
                std::process::exit(e.kind.exit_code());
            }
            Ok(!(c.strict && report.has_nonconverged()))
        }
        Command::Oracle {
            common,
            data,
            step,
            out,
        } => {
            let mut c = common.resolve()?;
            data.apply(&mut c);
            c.validate()?;
            let loaded = load_unlabeled(data_paths(&c)?)?;
            let params = OracleParams {
                epsilon: c.epsilon,
                step,
                lambda: c.lambda.weights(),
                ..Default::default()
            };
            let result = simplex_grid_oracle(&loaded.sources, loaded.target.view(), &params)?;
            let converged = result.points.iter().all(|p| p.converged);
            write_json(&result, out.as_deref())?;
            Ok(converged || !c.strict)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: solver did not converge within max_iter (--strict)");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
