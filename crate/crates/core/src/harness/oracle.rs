//! Brute-force proportion search for two-class problems.
//!
//! For each `pi` on a grid the source masses are set to `d2 [pi, 1 - pi]`, each
//! source is transported to the uniform target with Sinkhorn, and the summed
//! entropic objective `sum_k lambda_k (<gamma_k, C_k> / eps - H(gamma_k))` is
//! recorded. The true target proportion should sit at the minimum.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class_ops::{build_for_domain, ClassOperators, ProportionVector};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::jcpot::validate_lambda;
use crate::ot::{entropy, shifted_gibbs_kernel, sinkhorn_with_kernel, squared_euclidean_cost, CostShift, GibbsKernel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub epsilon: f64,
    pub step: f64,
    pub lambda: Option<Vec<f64>>,
    /// Sinkhorn tolerance per grid point; tighter than the solver default so
    /// neighboring objective values are comparable.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            step: 0.01,
            lambda: None,
            tol: 1e-9,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// Proportion of class 0.
    pub pi: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub pi: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracle {
    pub argmin: ProportionVector,
    pub points: Vec<GridPoint>,
    /// Grid points where a class gets no mass and the problem is undefined.
    pub skipped: Vec<SkippedPoint>,
}

struct Domain {
    kernel: GibbsKernel,
    scaled_cost: Array2<f64>,
    ops: ClassOperators,
}

fn grid(step: f64) -> Vec<f64> {
    let m = (1.0 / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=m).map(|i| (i as f64 * step).min(1.0)).collect();
    if (1.0 - pts[m]).abs() > 1e-12 {
        pts.push(1.0);
    }
    pts
}

fn objective(
    domains: &[Domain],
    lambda: &[f64],
    h: &[f64],
    target_mass: &Array1<f64>,
    p: &OracleParams,
) -> Result<(f64, bool)> {
    let mut total = 0.0;
    let mut all_converged = true;
    for (d, &l) in domains.iter().zip(lambda) {
        let a = d.ops.distribute(h);
        let out = sinkhorn_with_kernel(a.view(), target_mass.view(), &d.kernel, p.tol, p.max_iter)?;
        all_converged &= out.converged;
        let g = out.coupling.values();
        let cost: f64 = ndarray::Zip::from(&g)
            .and(&d.scaled_cost)
            .fold(0.0, |acc, x, c| acc + x * c);
        total += l * (cost / p.epsilon - entropy(g));
    }
    Ok((total, all_converged))
}

pub fn simplex_grid_oracle(
    sources: &[LabeledDataset],
    target: ArrayView2<'_, f64>,
    params: &OracleParams,
) -> Result<GridOracle> {
    if !(params.step > 0.0 && params.step <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "grid step must lie in (0, 0.5], got {}",
            params.step
        )));
    }
    if sources.is_empty() {
        return Err(Error::InvalidInput("no source domains".into()));
    }
    let lambda = match &params.lambda {
        Some(l) => {
            validate_lambda(l, sources.len())?;
            l.clone()
        }
        None => vec![1.0 / sources.len() as f64; sources.len()],
    };
    let domains = sources
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if s.labels.iter().any(|&y| y > 1) {
                return Err(Error::InvalidInput(format!(
                    "the grid oracle handles two classes; source {k} has more"
                )));
            }
            let ops = build_for_domain(&s.labels, 2, k)?;
            let cost = squared_euclidean_cost(s.points(), target)?;
            let kernel = shifted_gibbs_kernel(&cost, params.epsilon, CostShift::RowsThenColumns)?;
            let scaled_cost = cost.values().mapv(|c| c / kernel.scale());
            Ok(Domain {
                kernel,
                scaled_cost,
                ops,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = target.nrows();
    let target_mass = Array1::from_elem(n, 1.0 / n as f64);
    let evaluated = grid(params.step)
        .into_par_iter()
        .map(|pi| {
            let h = [pi, 1.0 - pi];
            if let Some(class) = h.iter().position(|&v| v <= 0.0) {
                let reason = Error::MissingClass { domain: 0, class }.to_string();
                return Ok(Err(SkippedPoint { pi, reason }));
            }
            let (value, converged) = objective(&domains, &lambda, &h, &target_mass, params)?;
            Ok(Ok(GridPoint {
                pi,
                objective: value,
                converged,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for e in evaluated {
        match e {
            Ok(p) => points.push(p),
            Err(s) => skipped.push(s),
        }
    }
    let best = points
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .ok_or_else(|| Error::InvalidParameter("grid has no interior points".into()))?;
    if skipped.iter().any(|s| s.pi > 0.0 && s.pi < 1.0) {
        log::warn!("grid oracle skipped interior points: {skipped:?}");
    }
    Ok(GridOracle {
        argmin: ProportionVector::new(vec![best.pi, 1.0 - best.pi])?,
        points,
        skipped,
    })
}
