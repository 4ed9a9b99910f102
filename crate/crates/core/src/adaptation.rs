//! Turning couplings into target predictions.
//!
//! Label propagation (LP) reads class probabilities straight off the
//! class-aggregated couplings. Barycentric mapping (PT) moves every source
//! point to the coupling-weighted mean of the target and classifies the target
//! with 1-nearest-neighbor on the moved points.

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis};
use serde::{Deserialize, Serialize};

use crate::class_ops::{build_class_operators, ClassOperators};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::jcpot::{validate_lambda, JcpotSolution};
use crate::ot::{sinkhorn, squared_euclidean_cost, Coupling, DiscreteMeasure, SinkhornOutput, SinkhornParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Label propagation.
    Lp,
    /// Barycentric mapping + 1-NN.
    Pt,
    /// 1-NN on the raw sources, no transport.
    Nn,
}

/// Per-target class scores, C × n. Columns with mass sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScores {
    values: Array2<f64>,
    column_norms: Array1<f64>,
    unlabeled: Vec<usize>,
}

impl LabelScores {
    /// Normalizes each column of `raw`; all-zero columns stay zero and are flagged.
    pub fn from_raw(raw: Array2<f64>) -> Self {
        let column_norms = raw.sum_axis(NdAxis(0));
        let mut values = raw;
        let mut unlabeled = Vec::new();
        for (j, (mut col, &s)) in values.axis_iter_mut(NdAxis(1)).zip(column_norms.iter()).enumerate() {
            if s > 0.0 {
                col.mapv_inplace(|x| x / s);
            } else {
                unlabeled.push(j);
            }
        }
        Self {
            values,
            column_norms,
            unlabeled,
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Raw column sums before normalization.
    pub fn column_norms(&self) -> &Array1<f64> {
        &self.column_norms
    }

    /// Target indices that received no mass.
    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn num_classes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_targets(&self) -> usize {
        self.values.ncols()
    }

    /// Argmax per column; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.values
            .axis_iter(NdAxis(1))
            .map(|col| {
                let mut best = 0;
                for (c, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub scores: LabelScores,
    pub method: Decoder,
}

impl Prediction {
    pub fn from_scores(scores: LabelScores, method: Decoder) -> Self {
        Self {
            labels: scores.argmax(),
            scores,
            method,
        }
    }

    /// Hard labels with one-hot scores.
    pub fn from_labels(labels: Vec<usize>, num_classes: usize, method: Decoder) -> Result<Self> {
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidInput(format!("label {y} outside 0..{num_classes}")));
        }
        let mut raw = Array2::zeros((num_classes, labels.len()));
        for (j, &y) in labels.iter().enumerate() {
            raw[[y, j]] = 1.0;
        }
        Ok(Self {
            scores: LabelScores::from_raw(raw),
            labels,
            method,
        })
    }
}

/// `L = sum_k lambda_k d1_k gamma_k`, column-normalized.
pub fn label_propagation(couplings: &[Coupling], ops: &[ClassOperators], lambda: &[f64]) -> Result<LabelScores> {
    if couplings.is_empty() || couplings.len() != ops.len() {
        return Err(Error::InvalidInput(format!(
            "{} couplings for {} operator sets",
            couplings.len(),
            ops.len()
        )));
    }
    validate_lambda(lambda, couplings.len())?;
    let n = couplings[0].shape().1;
    let num_classes = ops[0].num_classes();
    let mut raw = Array2::<f64>::zeros((num_classes, n));
    for (k, ((g, o), &l)) in couplings.iter().zip(ops).zip(lambda).enumerate() {
        let (rows, cols) = g.shape();
        if cols != n || rows != o.num_instances() || o.num_classes() != num_classes {
            return Err(Error::InvalidInput(format!(
                "coupling {k} is {rows}x{cols}, expected {}x{n} over {num_classes} classes",
                o.num_instances()
            )));
        }
        for (row, &y) in g.values().outer_iter().zip(o.labels()) {
            raw.row_mut(y).scaled_add(l, &row);
        }
    }
    Ok(LabelScores::from_raw(raw))
}

/// Source points moved onto the target by a coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap {
    pub points: Array2<f64>,
    /// Source rows that were mapped, in order.
    pub kept: Vec<usize>,
    /// Source rows with zero mass, left out.
    pub dropped: Vec<usize>,
}

/// Row `i` maps to `gamma[i, :] · target / sum(gamma[i, :])`.
pub fn barycentric_map(gamma: &Coupling, target_points: ArrayView2<'_, f64>) -> Result<BarycentricMap> {
    let (rows, cols) = gamma.shape();
    if cols != target_points.nrows() {
        return Err(Error::InvalidInput(format!(
            "coupling has {cols} columns for {} target points",
            target_points.nrows()
        )));
    }
    let mass = gamma.row_marginal();
    let kept: Vec<usize> = (0..rows).filter(|&i| mass[i] > 0.0).collect();
    let dropped: Vec<usize> = (0..rows).filter(|&i| mass[i].is_nan() || mass[i] <= 0.0).collect();
    if !dropped.is_empty() {
        log::warn!("barycentric map: dropped {} zero-mass source rows", dropped.len());
    }
    let plan = gamma.values();
    let mut points = Array2::zeros((kept.len(), target_points.ncols()));
    for (mut out, &i) in points.outer_iter_mut().zip(&kept) {
        out.assign(&(plan.row(i).dot(&target_points) / mass[i]));
    }
    Ok(BarycentricMap { points, kept, dropped })
}

/// 1-NN labels under squared Euclidean distance; ties go to the earlier
/// training point.
pub fn nearest_neighbor_labels(
    train_points: ArrayView2<'_, f64>,
    train_labels: &[usize],
    query: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    if train_points.nrows() == 0 {
        return Err(Error::InvalidInput("no training points for nearest neighbor".into()));
    }
    if train_points.nrows() != train_labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} training points but {} labels",
            train_points.nrows(),
            train_labels.len()
        )));
    }
    if train_points.ncols() != query.ncols() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            train_points.ncols(),
            query.ncols()
        )));
    }
    Ok(query
        .outer_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (i, p) in train_points.outer_iter().enumerate() {
                let d: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, i);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

/// 1-NN classification of the target from mapped, labeled source points.
pub fn classify_pt(
    mapped_points: ArrayView2<'_, f64>,
    mapped_labels: &[usize],
    num_classes: usize,
    target_points: ArrayView2<'_, f64>,
) -> Result<Prediction> {
    if mapped_points.nrows() == 0 {
        return Err(Error::InvalidInput("no mapped source points".into()));
    }
    if let Some(&y) = mapped_labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::InvalidInput(format!("label {y} outside 0..{num_classes}")));
    }
    let labels = nearest_neighbor_labels(mapped_points, mapped_labels, target_points)?;
    Prediction::from_labels(labels, num_classes, Decoder::Pt)
}

/// JCPOT-LP: label propagation with the solver's couplings and weights.
pub fn jcpot_lp(solution: &JcpotSolution) -> Result<Prediction> {
    let scores = label_propagation(&solution.couplings, &solution.operators, &solution.lambda)?;
    Ok(Prediction::from_scores(scores, Decoder::Lp))
}

/// JCPOT-PT: map every source through its coupling, then 1-NN on the pooled
/// mapped points.
pub fn jcpot_pt(
    solution: &JcpotSolution,
    sources: &[LabeledDataset],
    target_points: ArrayView2<'_, f64>,
) -> Result<Prediction> {
    if sources.len() != solution.couplings.len() {
        return Err(Error::InvalidInput(format!(
            "{} sources for {} couplings",
            sources.len(),
            solution.couplings.len()
        )));
    }
    let mut parts = Vec::with_capacity(sources.len());
    for (g, src) in solution.couplings.iter().zip(sources) {
        let map = barycentric_map(g, target_points)?;
        let labels = map.kept.iter().map(|&i| src.labels[i]).collect();
        parts.push(LabeledDataset::new(map.points, labels)?);
    }
    let pooled = LabeledDataset::concat(&parts)?;
    let num_classes = solution.h_hat.len();
    classify_pt(pooled.points(), &pooled.labels, num_classes, target_points)
}

#[derive(Debug, Clone)]
pub struct OtdaOutput {
    pub transport: SinkhornOutput,
    pub lp: Prediction,
    pub pt: Prediction,
}

/// Plain entropic OT between the pooled sources and the target, uniform
/// weights on both sides, decoded both ways.
pub fn otda_baseline(
    merged_source: &LabeledDataset,
    num_classes: usize,
    target_points: ArrayView2<'_, f64>,
    params: &SinkhornParams,
) -> Result<OtdaOutput> {
    let ops = build_class_operators(&merged_source.labels, num_classes)?;
    let mu = DiscreteMeasure::uniform(merged_source.points.clone())?;
    let nu = DiscreteMeasure::uniform(target_points.to_owned())?;
    let cost = squared_euclidean_cost(mu.support(), nu.support())?;
    let transport = sinkhorn(&mu, &nu, &cost, params)?;
    if !transport.converged {
        log::warn!(
            "otda: sinkhorn stopped after {} iterations (residuals {:e}, {:e})",
            transport.iterations,
            transport.row_residual,
            transport.col_residual
        );
    }

    let scores = label_propagation(std::slice::from_ref(&transport.coupling), &[ops], &[1.0])?;
    let lp = Prediction::from_scores(scores, Decoder::Lp);

    let map = barycentric_map(&transport.coupling, target_points)?;
    let labels: Vec<usize> = map.kept.iter().map(|&i| merged_source.labels[i]).collect();
    let pt = classify_pt(map.points.view(), &labels, num_classes, target_points)?;
    Ok(OtdaOutput { transport, lp, pt })
}

/// Coupling mass moved between points of different classes. Needs the true
/// target labels, so it is an evaluation diagnostic only.
pub fn class_mass_leakage(gamma: &Coupling, source_labels: &[usize], target_labels: &[usize]) -> Result<f64> {
    let (rows, cols) = gamma.shape();
    if rows != source_labels.len() || cols != target_labels.len() {
        return Err(Error::InvalidInput(format!(
            "coupling is {rows}x{cols} but got {} source and {} target labels",
            source_labels.len(),
            target_labels.len()
        )));
    }
    let mut leak = 0.0;
    for (row, &ys) in gamma.values().outer_iter().zip(source_labels) {
        for (&g, &yt) in row.iter().zip(target_labels) {
            if ys != yt {
                leak += g;
            }
        }
    }
    Ok(leak)
}
