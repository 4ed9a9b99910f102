//! Joint class-proportion and optimal-transport estimation.
//!
//! Each source domain `k` gets a coupling `gamma_k` (n_k × n) to the uniformly
//! weighted target. A sweep alternates three KL projections:
//!
//! 1. every coupling's column sums are projected onto `1/n`;
//! 2. the target proportions `h` are set to the `lambda`-weighted geometric
//!    mean of the per-domain class masses `d1_k (gamma_k 1)`;
//! 3. every coupling's rows are projected onto `d2_k h`.
//!
//! The sweep repeats until `||h_t - h_{t-1}||_2 <= tol`. Couplings are kept as
//! `diag(a_k) zeta_k diag(b_k)` so a sweep costs two matrix-vector products per
//! domain; the dense matrix steps are exposed as [`proportion_update`] and
//! [`class_row_projection`].

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis, Zip};
use rayon::prelude::*;

use crate::class_ops::{build_for_domain, ClassOperators, ProportionVector};
use crate::data::LabeledDataset;
use crate::error::{Axis, Error, Result};
use crate::ot::{row_projection, shifted_gibbs_kernel, squared_euclidean_cost, CostShift, Coupling};

#[derive(Debug, Clone)]
pub struct JcpotProblem {
    pub sources: Vec<LabeledDataset>,
    pub target: Array2<f64>,
    pub num_classes: usize,
    /// Regularization on each domain's max-rescaled cost.
    pub epsilon: f64,
    /// Convex domain weights; `None` means uniform.
    pub lambda: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl JcpotProblem {
    pub fn new(sources: Vec<LabeledDataset>, target: Array2<f64>, num_classes: usize) -> Self {
        Self {
            sources,
            target,
            num_classes,
            epsilon: 0.01,
            lambda: None,
            tol: 1e-6,
            max_iter: 1000,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_lambda(mut self, lambda: Vec<f64>) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// The domain weights actually used.
    pub fn resolved_lambda(&self) -> Result<Vec<f64>> {
        let k = self.sources.len();
        match &self.lambda {
            None => Ok(vec![1.0 / k as f64; k]),
            Some(l) => {
                validate_lambda(l, k)?;
                Ok(l.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::InvalidInput("at least one source domain is required".into()));
        }
        if self.target.nrows() == 0 {
            return Err(Error::InvalidInput("target domain is empty".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be at least 1".into()));
        }
        let d = self.target.ncols();
        for (k, s) in self.sources.iter().enumerate() {
            if s.dim() != d {
                return Err(Error::InvalidInput(format!(
                    "source {k} has dimension {} but target has {d}",
                    s.dim()
                )));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        self.resolved_lambda().map(|_| ())
    }
}

pub(crate) fn validate_lambda(lambda: &[f64], num_domains: usize) -> Result<()> {
    if lambda.len() != num_domains {
        return Err(Error::InvalidParameter(format!(
            "lambda has {} weights for {num_domains} domains",
            lambda.len()
        )));
    }
    if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "lambda weights must be nonnegative: {lambda:?}"
        )));
    }
    let s: f64 = lambda.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("lambda must sum to 1, got {s}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct JcpotSolution {
    /// Estimated target proportions, normalized.
    pub h_hat: ProportionVector,
    /// The last geometric-mean update, before normalization.
    pub h_raw: Vec<f64>,
    /// One coupling per source, n_k × n.
    pub couplings: Vec<Coupling>,
    pub operators: Vec<ClassOperators>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||h_t - h_{t-1}||_2` per sweep.
    pub h_trace: Vec<f64>,
    /// Per domain `||gamma_k^T 1 - 1/n||_1` of the returned couplings.
    pub target_residuals: Vec<f64>,
    /// Per domain `||d1_k gamma_k 1 - h_raw||_1` of the returned couplings.
    pub class_residuals: Vec<f64>,
}

struct DomainState {
    kernel: Array2<f64>,
    ops: ClassOperators,
    row_scale: Array1<f64>,
    col_scale: Array1<f64>,
    // zeta (col_scale), cached between the two half-steps
    kernel_times_col: Array1<f64>,
    class_mass: Array1<f64>,
}

impl DomainState {
    fn project_target(&mut self, target_mass: f64) -> Result<()> {
        let col_sums = self.kernel.t().dot(&self.row_scale);
        for (index, (b, &s)) in self.col_scale.iter_mut().zip(col_sums.iter()).enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::DegenerateKernel {
                    axis: Axis::Column,
                    index,
                });
            }
            *b = target_mass / s;
        }
        self.kernel_times_col = self.kernel.dot(&self.col_scale);
        let row_mass = &self.row_scale * &self.kernel_times_col;
        self.class_mass = self.ops.aggregate(row_mass.view());
        Ok(())
    }

    fn project_classes(&mut self, h: &[f64]) -> Result<()> {
        let wanted = self.ops.distribute(h);
        for (index, ((a, &w), &s)) in self
            .row_scale
            .iter_mut()
            .zip(wanted.iter())
            .zip(self.kernel_times_col.iter())
            .enumerate()
        {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::DegenerateKernel { axis: Axis::Row, index });
            }
            *a = w / s;
        }
        Ok(())
    }

    fn coupling(&self) -> Coupling {
        let mut plan = self.kernel.clone();
        for (mut row, &a) in plan.outer_iter_mut().zip(self.row_scale.iter()) {
            Zip::from(&mut row).and(&self.col_scale).for_each(|x, &b| *x *= a * b);
        }
        Coupling::from_raw(plan)
    }
}

/// `exp(sum_k lambda_k log m_k)` per class, skipping domains with zero weight.
fn weighted_geometric_mean(class_masses: &[Array1<f64>], lambda: &[f64]) -> Result<Vec<f64>> {
    let num_classes = class_masses.first().map_or(0, |m| m.len());
    let mut log_h = vec![0.0; num_classes];
    for (domain, (mass, &l)) in class_masses.iter().zip(lambda).enumerate() {
        if l == 0.0 {
            continue;
        }
        for (class, (acc, &m)) in log_h.iter_mut().zip(mass.iter()).enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::DegenerateMass { domain, class });
            }
            *acc += l * m.ln();
        }
    }
    Ok(log_h.into_iter().map(f64::exp).collect())
}

/// Proportion update on dense matrices: `prod_k (d1_k (zeta_k 1))^lambda_k`.
pub fn proportion_update(kernels: &[ArrayView2<'_, f64>], ops: &[ClassOperators], lambda: &[f64]) -> Result<Vec<f64>> {
    if kernels.len() != ops.len() || kernels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} kernels for {} operator sets",
            kernels.len(),
            ops.len()
        )));
    }
    validate_lambda(lambda, kernels.len())?;
    let masses = kernels
        .iter()
        .zip(ops)
        .map(|(z, o)| {
            if z.nrows() != o.num_instances() {
                return Err(Error::InvalidInput(format!(
                    "kernel has {} rows for {} instances",
                    z.nrows(),
                    o.num_instances()
                )));
            }
            Ok(o.aggregate(z.sum_axis(NdAxis(1)).view()))
        })
        .collect::<Result<Vec<_>>>()?;
    weighted_geometric_mean(&masses, lambda)
}

/// Row projection onto prescribed class masses: `diag(d2 h / (zeta 1)) zeta`.
pub fn class_row_projection(kernel: ArrayView2<'_, f64>, ops: &ClassOperators, h: &[f64]) -> Result<Coupling> {
    if h.len() != ops.num_classes() {
        return Err(Error::InvalidInput(format!(
            "h has {} entries for {} classes",
            h.len(),
            ops.num_classes()
        )));
    }
    if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(format!("h must be nonnegative: {h:?}")));
    }
    row_projection(kernel, ops.distribute(h).view())
}

/// Runs the alternating projections to convergence or `max_iter`.
pub fn jcpot_fit(problem: &JcpotProblem) -> Result<JcpotSolution> {
    problem.validate()?;
    let lambda = problem.resolved_lambda()?;
    let num_classes = problem.num_classes;
    let n = problem.target.nrows();
    let target_mass = 1.0 / n as f64;

    let mut domains = problem
        .sources
        .par_iter()
        .enumerate()
        .map(|(k, src)| {
            let ops = build_for_domain(&src.labels, num_classes, k)?;
            let cost = squared_euclidean_cost(src.points(), problem.target.view())?;
            // Column shifts are absorbed by the first target projection.
            let kernel = shifted_gibbs_kernel(&cost, problem.epsilon, CostShift::Columns)?.into_inner();
            let nk = src.len();
            Ok(DomainState {
                kernel,
                ops,
                row_scale: Array1::ones(nk),
                col_scale: Array1::ones(n),
                kernel_times_col: Array1::zeros(nk),
                class_mass: Array1::zeros(num_classes),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut h_prev = vec![1.0 / num_classes as f64; num_classes];
    let mut h = h_prev.clone();
    let mut h_trace = Vec::new();
    let mut converged = false;

    while h_trace.len() < problem.max_iter {
        domains.par_iter_mut().try_for_each(|d| d.project_target(target_mass))?;
        let masses: Vec<_> = domains.iter().map(|d| d.class_mass.clone()).collect();
        h = weighted_geometric_mean(&masses, &lambda)?;
        domains.par_iter_mut().try_for_each(|d| d.project_classes(&h))?;

        let err = h
            .iter()
            .zip(&h_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        h_trace.push(err);
        h_prev.clone_from(&h);
        if err <= problem.tol {
            converged = true;
            break;
        }
    }
    log::debug!("jcpot: {} sweeps, converged = {converged}, h = {h:?}", h_trace.len());

    let couplings: Vec<Coupling> = domains.par_iter().map(DomainState::coupling).collect();
    let target_residuals = couplings
        .iter()
        .map(|g| g.col_marginal().iter().map(|s| (s - target_mass).abs()).sum())
        .collect();
    let class_residuals = couplings
        .iter()
        .zip(&domains)
        .map(|(g, d)| {
            d.ops
                .aggregate(g.row_marginal().view())
                .iter()
                .zip(&h)
                .map(|(a, b)| (a - b).abs())
                .sum()
        })
        .collect();

    let h_hat = ProportionVector::new(h.clone())?.normalized();
    Ok(JcpotSolution {
        h_hat,
        h_raw: h,
        couplings,
        operators: domains.into_iter().map(|d| d.ops).collect(),
        lambda,
        iterations: h_trace.len(),
        converged,
        h_trace,
        target_residuals,
        class_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class_ops::build_class_operators;
    use ndarray::array;

    #[test]
    fn proportion_update_single_domain_is_class_mass() {
        let ops = build_class_operators(&[0, 0, 1], 2).unwrap();
        let z = array![[0.1, 0.2], [0.3, 0.0], [0.25, 0.15]];
        let h = proportion_update(&[z.view()], &[ops], &[1.0]).unwrap();
        assert!((h[0] - 0.6).abs() < 1e-15 && (h[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn proportion_update_geometric_mean() {
        let ops = build_class_operators(&[0, 1], 2).unwrap();
        let z1 = array![[0.25, 0.25], [0.25, 0.25]];
        let h = proportion_update(&[z1.view(), z1.view()], &[ops.clone(), ops.clone()], &[0.5, 0.5]).unwrap();
        assert!((h[0] - 0.5).abs() < 1e-15 && (h[1] - 0.5).abs() < 1e-15);

        let za = array![[0.4], [0.6]];
        let zb = array![[0.9], [0.1]];
        let h = proportion_update(&[za.view(), zb.view()], &[ops.clone(), ops], &[0.5, 0.5]).unwrap();
        assert!((h[0] - 0.6).abs() < 1e-15);
        assert!((h[1] - 0.06f64.sqrt()).abs() < 1e-15);
        assert!(h.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn proportion_update_zero_class_mass() {
        let ops = build_class_operators(&[0, 1], 2).unwrap();
        let z = array![[0.5, 0.5], [0.0, 0.0]];
        let err = proportion_update(&[z.view()], &[ops], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateMass { domain: 0, class: 1 }));
    }

    #[test]
    fn class_row_projection_worked_example() {
        let ops = build_class_operators(&[0, 0, 0, 1, 1], 2).unwrap();
        let z = array![[0.3, 0.1], [0.2, 0.9], [1.0, 0.5], [0.05, 0.05], [0.7, 0.2]];
        let g = class_row_projection(z.view(), &ops, &[0.6, 0.4]).unwrap();
        for s in g.row_marginal() {
            assert!((s - 0.2).abs() < 1e-15);
        }
        let again = class_row_projection(g.values(), &ops, &[0.6, 0.4]).unwrap();
        for (a, b) in again.values().iter().zip(g.values().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn class_row_projection_single_class_is_row_projection() {
        let ops = build_class_operators(&[0, 0, 0], 1).unwrap();
        let z = array![[0.3, 0.1], [0.2, 0.9], [1.0, 0.5]];
        let g = class_row_projection(z.view(), &ops, &[1.0]).unwrap();
        let r = row_projection(z.view(), Array1::from_elem(3, 1.0 / 3.0).view()).unwrap();
        assert_eq!(g, r);
    }

    #[test]
    fn lambda_validation() {
        assert!(validate_lambda(&[0.5, 0.5], 2).is_ok());
        assert!(validate_lambda(&[0.5, 0.4], 2).is_err());
        assert!(validate_lambda(&[1.0], 2).is_err());
        assert!(validate_lambda(&[1.5, -0.5], 2).is_err());
    }

    #[test]
    fn missing_class_in_second_source() {
        let s0 = LabeledDataset::new(array![[0.0], [1.0]], vec![0, 1]).unwrap();
        let s1 = LabeledDataset::new(array![[0.0], [1.0]], vec![0, 0]).unwrap();
        let p = JcpotProblem::new(vec![s0, s1], array![[0.5]], 2);
        match jcpot_fit(&p) {
            Err(Error::MissingClass { domain: 1, class: 1 }) => {}
            other => panic!("expected missing class, got {other:?}"),
        }
    }
}
