//! Dense entropic optimal transport.
//!
//! Everything here works on small-to-medium dense matrices (a few thousand
//! rows at most). Couplings are stored source-rows × target-columns.

mod exact;

pub use exact::{exact_ot, exact_ot_oracle};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis as NdAxis, Zip};

use crate::error::{Axis, Error, Result};

/// Kernel rows or columns whose largest entry falls below this are rejected.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Pairwise ground costs between two point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Array2<f64>,
}

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("cost matrix is empty".into()));
        }
        if let Some(bad) = values.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cost entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// The divisor used by max-entry rescaling (1 for an all-zero cost).
    pub fn rescale_factor(&self) -> f64 {
        let m = self.max();
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// Median entry (lower median for even counts).
    pub fn median(&self) -> f64 {
        let mut all: Vec<f64> = self.values.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        all[(all.len() - 1) / 2]
    }
}

/// Squared Euclidean cost between the rows of `x1` and the rows of `x2`.
pub fn squared_euclidean_cost(x1: ArrayView2<'_, f64>, x2: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    let (n1, d1) = x1.dim();
    let (n2, d2) = x2.dim();
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidInput("point sets must be non-empty".into()));
    }
    if d1 == 0 || d1 != d2 {
        return Err(Error::InvalidInput(format!("dimension mismatch: {d1} vs {d2}")));
    }
    let mut values = Array2::<f64>::zeros((n1, n2));
    for (i, p) in x1.outer_iter().enumerate() {
        for (j, q) in x2.outer_iter().enumerate() {
            values[[i, j]] = p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    }
    CostMatrix::new(values)
}

/// How the cost is scaled before exponentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rescale {
    /// Divide by the largest cost entry, making epsilon dimensionless.
    #[default]
    MaxEntry,
    /// Use the cost as is.
    None,
}

/// `exp(-C' / epsilon)` for the (possibly rescaled) cost `C'`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsKernel {
    values: Array2<f64>,
    epsilon: f64,
    scale: f64,
}

impl GibbsKernel {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The factor the cost was divided by (1 when rescaling is off).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// Gibbs kernel with max-entry cost rescaling.
pub fn gibbs_kernel(cost: &CostMatrix, epsilon: f64) -> Result<GibbsKernel> {
    gibbs_kernel_with(cost, epsilon, Rescale::MaxEntry)
}

pub fn gibbs_kernel_with(cost: &CostMatrix, epsilon: f64, rescale: Rescale) -> Result<GibbsKernel> {
    let scale = match rescale {
        Rescale::MaxEntry => cost.rescale_factor(),
        Rescale::None => 1.0,
    };
    kernel_from_values(cost.values.view(), scale, epsilon)
}

/// Which cost minima are subtracted before exponentiating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostShift {
    None,
    /// Subtract each column's minimum.
    Columns,
    /// Subtract each row's minimum, then each column's minimum.
    RowsThenColumns,
}

/// Gibbs kernel of a shifted, max-rescaled cost.
///
/// Shifting row `i` by `alpha_i` and column `j` by `beta_j` multiplies the
/// kernel by `diag(exp(alpha / eps))` on the left and `diag(exp(beta / eps))`
/// on the right. Matrix scaling absorbs both, so Sinkhorn returns the same
/// coupling, but every shifted row/column keeps an entry equal to 1. Epsilon is
/// still relative to the max of the unshifted cost.
pub fn shifted_gibbs_kernel(cost: &CostMatrix, epsilon: f64, shift: CostShift) -> Result<GibbsKernel> {
    kernel_from_values(shifted_cost(cost, shift).view(), cost.rescale_factor(), epsilon)
}

fn shifted_cost(cost: &CostMatrix, shift: CostShift) -> Array2<f64> {
    let mut c = cost.values.clone();
    if shift == CostShift::RowsThenColumns {
        for mut row in c.outer_iter_mut() {
            let m = row.iter().copied().fold(f64::INFINITY, f64::min);
            row.mapv_inplace(|x| x - m);
        }
    }
    if shift != CostShift::None {
        for mut col in c.axis_iter_mut(NdAxis(1)) {
            let m = col.iter().copied().fold(f64::INFINITY, f64::min);
            col.mapv_inplace(|x| x - m);
        }
    }
    c
}

fn kernel_from_values(cost: ArrayView2<'_, f64>, scale: f64, epsilon: f64) -> Result<GibbsKernel> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let values = cost.mapv(|c| (-(c / scale) / epsilon).exp());

    for (axis, nd_axis) in [(Axis::Row, NdAxis(0)), (Axis::Column, NdAxis(1))] {
        for (index, lane) in values.axis_iter(nd_axis).enumerate() {
            let max = lane.iter().copied().fold(0.0, f64::max);
            if max < UNDERFLOW_FLOOR {
                return Err(Error::Underflow {
                    axis,
                    index,
                    max,
                    floor: UNDERFLOW_FLOOR,
                    epsilon,
                });
            }
        }
    }
    Ok(GibbsKernel { values, epsilon, scale })
}

/// A nonnegative transport plan, source rows × target columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    values: Array2<f64>,
}

impl Coupling {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "coupling entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn row_marginal(&self) -> Array1<f64> {
        self.values.sum_axis(NdAxis(1))
    }

    pub fn col_marginal(&self) -> Array1<f64> {
        self.values.sum_axis(NdAxis(0))
    }

    pub fn total_mass(&self) -> f64 {
        self.values.sum()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// Weighted point cloud `sum_i mass_i * delta(support_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Array2<f64>,
    mass: Array1<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Array2<f64>, mass: Array1<f64>) -> Result<Self> {
        if support.nrows() != mass.len() {
            return Err(Error::InvalidInput(format!(
                "support has {} points but mass has {} entries",
                support.nrows(),
                mass.len()
            )));
        }
        if mass.is_empty() {
            return Err(Error::InvalidInput("measure has no support points".into()));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidInput("masses must be finite and nonnegative".into()));
        }
        let total = mass.sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!("masses must sum to 1, got {total}")));
        }
        Ok(Self { support, mass })
    }

    /// Equal mass on every support point.
    pub fn uniform(support: Array2<f64>) -> Result<Self> {
        let n = support.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("measure has no support points".into()));
        }
        Self::new(support, Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn support(&self) -> ArrayView2<'_, f64> {
        self.support.view()
    }

    pub fn mass(&self) -> ArrayView1<'_, f64> {
        self.mass.view()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// KL projection onto `{gamma : gamma 1 = mu_row}`: `diag(mu_row / (M 1)) M`.
pub fn row_projection(input: ArrayView2<'_, f64>, mu_row: ArrayView1<'_, f64>) -> Result<Coupling> {
    if mu_row.len() != input.nrows() {
        return Err(Error::InvalidInput(format!(
            "row marginal has {} entries for {} rows",
            mu_row.len(),
            input.nrows()
        )));
    }
    let sums = input.sum_axis(NdAxis(1));
    let mut out = input.to_owned();
    for (index, ((mut row, &s), &m)) in out.outer_iter_mut().zip(sums.iter()).zip(mu_row.iter()).enumerate() {
        if s.is_nan() || s <= 0.0 {
            return Err(Error::DegenerateKernel { axis: Axis::Row, index });
        }
        let f = m / s;
        row.mapv_inplace(|x| x * f);
    }
    Ok(Coupling::from_raw(out))
}

/// KL projection onto `{gamma : gamma^T 1 = mu_col}`: `M diag(mu_col / (M^T 1))`.
pub fn col_projection(input: ArrayView2<'_, f64>, mu_col: ArrayView1<'_, f64>) -> Result<Coupling> {
    if mu_col.len() != input.ncols() {
        return Err(Error::InvalidInput(format!(
            "column marginal has {} entries for {} columns",
            mu_col.len(),
            input.ncols()
        )));
    }
    let sums = input.sum_axis(NdAxis(0));
    let mut factors = Array1::<f64>::zeros(sums.len());
    for (index, ((f, &s), &m)) in factors.iter_mut().zip(sums.iter()).zip(mu_col.iter()).enumerate() {
        if s.is_nan() || s <= 0.0 {
            return Err(Error::DegenerateKernel {
                axis: Axis::Column,
                index,
            });
        }
        *f = m / s;
    }
    let mut out = input.to_owned();
    for mut row in out.outer_iter_mut() {
        Zip::from(&mut row).and(&factors).for_each(|x, f| *x *= f);
    }
    Ok(Coupling::from_raw(out))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SinkhornParams {
    /// Regularization strength on the rescaled cost.
    pub epsilon: f64,
    /// L1 tolerance on both marginal residuals.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

impl SinkhornParams {
    pub fn validate(&self) -> Result<()> {
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
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub coupling: Coupling,
    pub iterations: usize,
    pub converged: bool,
    /// `||gamma 1 - mu1||_1` of the returned coupling.
    pub row_residual: f64,
    /// `||gamma^T 1 - mu2||_1` of the returned coupling.
    pub col_residual: f64,
}

/// Entropic OT between two measures with the given ground cost.
///
/// The kernel is built on the row/column-shifted cost (see
/// [`shifted_gibbs_kernel`]). Non-convergence within `max_iter` is not an
/// error; check [`SinkhornOutput::converged`].
pub fn sinkhorn(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    cost: &CostMatrix,
    params: &SinkhornParams,
) -> Result<SinkhornOutput> {
    if cost.shape() != (mu1.len(), mu2.len()) {
        return Err(Error::InvalidInput(format!(
            "cost is {:?} but measures have {} and {} points",
            cost.shape(),
            mu1.len(),
            mu2.len()
        )));
    }
    params.validate()?;
    let scale = cost.rescale_factor();
    let shifted = shifted_cost(cost, CostShift::RowsThenColumns).mapv(|c| c / scale);
    let mut kernel = kernel_from_values(shifted.view(), 1.0, params.epsilon)?.into_inner();

    let schedule = annealing_schedule(params.epsilon);
    let (n1, n2) = kernel.dim();
    let mut f = Array1::<f64>::zeros(n1);
    let mut g = Array1::<f64>::zeros(n2);
    let mut used = 0;
    let mut last = None;
    for (stage, &eps) in schedule.iter().enumerate() {
        let is_final = stage + 1 == schedule.len();
        let budget = params.max_iter - used;
        let tol = if is_final {
            params.tol
        } else {
            params.tol.max(STAGE_TOL)
        };
        let log_kernel = shifted.mapv(|c| -c / eps);
        let alpha = f.mapv(|x| x / eps);
        let beta = g.mapv(|x| x / eps);
        if stage > 0 || !is_final {
            kernel = Zip::from(&log_kernel)
                .and_broadcast(alpha.view().insert_axis(NdAxis(1)))
                .and_broadcast(beta.view().insert_axis(NdAxis(0)))
                .map_collect(|&l, &al, &be| (l + al + be).exp());
        }
        let run = scale_to_marginals(
            mu1.mass(),
            mu2.mass(),
            std::mem::take(&mut kernel),
            Some(log_kernel),
            alpha,
            beta,
            tol,
            budget,
        )?;
        used += run.output.iterations;
        f = run.log_u.mapv(|x| x * eps);
        g = run.log_v.mapv(|x| x * eps);
        let exhausted = used >= params.max_iter;
        last = Some(run.output);
        if exhausted {
            break;
        }
    }
    let mut output = last.expect("schedule is never empty");
    output.iterations = used;
    Ok(output)
}

/// Regularization strengths below this are reached by halving from above it,
/// warm-starting each stage from the previous potentials.
const ANNEAL_START: f64 = 0.01;
/// Residual at which intermediate annealing stages hand over.
const STAGE_TOL: f64 = 1e-4;

fn annealing_schedule(epsilon: f64) -> Vec<f64> {
    let mut schedule = vec![epsilon];
    let mut e = epsilon;
    while e * 2.0 <= ANNEAL_START {
        e *= 2.0;
        schedule.push(e);
    }
    schedule.reverse();
    schedule
}

/// Sinkhorn matrix scaling on a precomputed kernel.
pub fn sinkhorn_with_kernel(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    kernel: &GibbsKernel,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornOutput> {
    let (n1, n2) = kernel.shape();
    if a.len() != n1 || b.len() != n2 {
        return Err(Error::InvalidInput(format!(
            "marginals of length {} and {} for a {n1}x{n2} kernel",
            a.len(),
            b.len()
        )));
    }
    let max_iter = max_iter_checked(max_iter)?;
    let run = scale_to_marginals(
        a,
        b,
        kernel.values().to_owned(),
        None,
        Array1::zeros(n1),
        Array1::zeros(n2),
        tol,
        max_iter,
    )?;
    Ok(run.output)
}

fn max_iter_checked(max_iter: usize) -> Result<usize> {
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    Ok(max_iter)
}

/// Scaling factors outside `[1 / ABSORB_BOUND, ABSORB_BOUND]` are folded into
/// the kernel.
const ABSORB_BOUND: f64 = 1e30;

fn needs_absorption(x: &Array1<f64>) -> bool {
    x.iter()
        .any(|&s| s > ABSORB_BOUND || (s > 0.0 && s < 1.0 / ABSORB_BOUND))
}

/// Alternating row/column scaling of `k`.
///
/// When a scaling factor drifts far from 1 it is absorbed: `log u` and `log v`
/// are added to running log-potentials and the kernel is rebuilt as
/// `exp(log_kernel + alpha_i + beta_j)`. The iterates are unchanged, but entries
/// that underflowed in the raw kernel come back once the potentials lift them.
#[allow(clippy::too_many_arguments)]
fn scale_to_marginals(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    mut k: Array2<f64>,
    log_kernel: Option<Array2<f64>>,
    mut alpha: Array1<f64>,
    mut beta: Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Scaled> {
    let (n1, n2) = k.dim();
    let mut log_kernel = log_kernel;
    let mut u = Array1::<f64>::zeros(n1);
    let mut v = Array1::<f64>::ones(n2);
    let mut kv = k.dot(&v);
    let mut iterations = 0;
    let mut converged = false;
    let (mut row_residual, mut col_residual) = (f64::INFINITY, f64::INFINITY);

    while iterations < max_iter {
        iterations += 1;
        scale_into(&mut u, a, &kv, Axis::Row)?;
        let ktu = k.t().dot(&u);
        scale_into(&mut v, b, &ktu, Axis::Column)?;
        kv = k.dot(&v);

        row_residual = l1_gap(&u, &kv, a);
        col_residual = l1_gap(&v, &ktu, b);
        if row_residual <= tol && col_residual <= tol {
            converged = true;
            break;
        }

        if needs_absorption(&u) || needs_absorption(&v) {
            let log_k = log_kernel.get_or_insert_with(|| k.mapv(f64::ln));
            for (p, s) in alpha
                .iter_mut()
                .zip(u.iter_mut())
                .chain(beta.iter_mut().zip(v.iter_mut()))
            {
                if *s > 0.0 {
                    *p += s.ln();
                    *s = 1.0;
                }
            }
            Zip::from(&mut k)
                .and(&*log_k)
                .and_broadcast(alpha.view().insert_axis(NdAxis(1)))
                .and_broadcast(beta.view().insert_axis(NdAxis(0)))
                .for_each(|x, &l, &al, &be| *x = (l + al + be).exp());
            kv = k.dot(&v);
        }
    }

    for (mut row, &ui) in k.outer_iter_mut().zip(u.iter()) {
        Zip::from(&mut row).and(&v).for_each(|x, &vj| *x *= ui * vj);
    }
    let log_scale = |p: &Array1<f64>, s: &Array1<f64>| -> Array1<f64> {
        Zip::from(p)
            .and(s)
            .map_collect(|&p, &s| if s > 0.0 { p + s.ln() } else { p })
    };
    Ok(Scaled {
        log_u: log_scale(&alpha, &u),
        log_v: log_scale(&beta, &v),
        output: SinkhornOutput {
            coupling: Coupling::from_raw(k),
            iterations,
            converged,
            row_residual,
            col_residual,
        },
    })
}

/// A scaling run plus its total log-potentials (absorbed + pending).
struct Scaled {
    output: SinkhornOutput,
    log_u: Array1<f64>,
    log_v: Array1<f64>,
}

/// `out = target / sums`, with 0 where the target mass is 0.
fn scale_into(out: &mut Array1<f64>, target: ArrayView1<'_, f64>, sums: &Array1<f64>, axis: Axis) -> Result<()> {
    for (index, ((o, &t), &s)) in out.iter_mut().zip(target.iter()).zip(sums.iter()).enumerate() {
        if t == 0.0 {
            *o = 0.0;
        } else if s > 0.0 && s.is_finite() && (t / s).is_finite() {
            *o = t / s;
        } else {
            return Err(Error::DegenerateKernel { axis, index });
        }
    }
    Ok(())
}

/// `sum_i |scale_i * sums_i - target_i|`
fn l1_gap(scale: &Array1<f64>, sums: &Array1<f64>, target: ArrayView1<'_, f64>) -> f64 {
    scale
        .iter()
        .zip(sums.iter())
        .zip(target.iter())
        .map(|((s, m), t)| (s * m - t).abs())
        .sum()
}

/// Frobenius product `<gamma, C>`.
pub fn transport_cost(gamma: ArrayView2<'_, f64>, cost: &CostMatrix) -> Result<f64> {
    if gamma.dim() != cost.shape() {
        return Err(Error::InvalidInput(format!(
            "coupling is {:?} but cost is {:?}",
            gamma.dim(),
            cost.shape()
        )));
    }
    Ok(Zip::from(&gamma).and(&cost.values).fold(0.0, |acc, g, c| acc + g * c))
}

/// `-sum gamma (log gamma - 1)`, with `0 log 0 = 0`.
pub fn entropy(gamma: ArrayView2<'_, f64>) -> f64 {
    -gamma
        .iter()
        .filter(|g| **g > 0.0)
        .map(|g| g * (g.ln() - 1.0))
        .sum::<f64>()
}

/// `KL(gamma | reference) = sum gamma (log(gamma / reference) - 1)`, with `0 log 0 = 0`.
pub fn kl_divergence(gamma: ArrayView2<'_, f64>, reference: ArrayView2<'_, f64>) -> Result<f64> {
    if gamma.dim() != reference.dim() {
        return Err(Error::InvalidInput(format!(
            "coupling is {:?} but reference is {:?}",
            gamma.dim(),
            reference.dim()
        )));
    }
    let mut acc = 0.0;
    for (&g, &r) in gamma.iter().zip(reference.iter()) {
        if g == 0.0 {
            continue;
        }
        if r.is_nan() || r <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += g * ((g / r).ln() - 1.0);
    }
    Ok(acc)
}
