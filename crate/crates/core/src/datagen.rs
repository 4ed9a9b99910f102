//! Seeded synthetic target-shift scenarios.
//!
//! Classes are isotropic Gaussians sharing one covariance; only the class
//! proportions differ between domains. Random streams are split from a single
//! seed with ChaCha stream ids:
//!
//! | stream  | use                            |
//! |---------|--------------------------------|
//! | 0       | source class-proportion draws  |
//! | 1       | target domain                  |
//! | 2 + k   | source domain k                |
//!
//! so a scenario with more sources extends one with fewer under the same seed.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::class_ops::ProportionVector;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

const PROPORTION_STREAM: u64 = 0;
const TARGET_STREAM: u64 = 1;
const FIRST_SOURCE_STREAM: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Integer counts summing to `n`, by largest-remainder rounding of `n * p`.
/// Ties in the remainder go to the lower class index.
pub fn largest_remainder_counts(n: usize, proportions: &[f64]) -> Vec<usize> {
    let total: f64 = proportions.iter().sum();
    let exact: Vec<f64> = proportions.iter().map(|p| n as f64 * p / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(n.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

/// Gaussian classes `N(means[c], sigma^2 I)` in the given proportions.
pub fn gen_gaussian_classes<R: Rng + ?Sized>(
    n: usize,
    proportions: &ProportionVector,
    means: &[Vec<f64>],
    sigma: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if means.len() != proportions.len() {
        return Err(Error::InvalidInput(format!(
            "{} means for {} classes",
            means.len(),
            proportions.len()
        )));
    }
    if !proportions.is_simplex() {
        return Err(Error::InvalidInput(format!(
            "class proportions must sum to 1: {:?}",
            proportions.values()
        )));
    }
    let dim = means[0].len();
    if dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(Error::InvalidInput(
            "class means must share a positive dimension".into(),
        ));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    if n < proportions.len() {
        return Err(Error::InvalidInput(format!(
            "need at least one instance per class, got n = {n}"
        )));
    }
    let counts = largest_remainder_counts(n, proportions.values());
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass { domain: 0, class });
    }

    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
        .collect();
    labels.shuffle(rng);

    let mut points = Array2::zeros((n, dim));
    for (mut row, &y) in points.outer_iter_mut().zip(&labels) {
        for (x, mu) in row.iter_mut().zip(&means[y]) {
            let z: f64 = rng.sample(StandardNormal);
            *x = mu + sigma * z;
        }
    }
    LabeledDataset::new(points, labels)
}

/// Two isotropic Gaussian classes, reproducible from `seed`.
pub fn gen_gaussian_binary(
    n: usize,
    proportions: &ProportionVector,
    mean0: &[f64],
    mean1: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if proportions.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "binary generator needs 2 proportions, got {}",
            proportions.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_gaussian_classes(n, proportions, &[mean0.to_vec(), mean1.to_vec()], sigma, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub num_sources: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub target_prop: Vec<f64>,
    /// Each source's class-0 proportion is drawn uniformly from this range.
    pub prop_range: [f64; 2],
    pub dim: usize,
    /// Class 1 is centred at `(separation, ..., separation)`; class 0 at the origin.
    pub separation: f64,
    pub sigma: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            num_sources: 10,
            n_source: 500,
            n_target: 400,
            target_prop: vec![0.2, 0.8],
            prop_range: [0.1, 0.9],
            dim: 2,
            separation: 3.0,
            sigma: 1.0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 {
            return Err(Error::InvalidParameter("num_sources must be at least 1".into()));
        }
        let [low, high] = self.prop_range;
        if !(0.0 < low && low <= high && high < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prop_range must satisfy 0 < low <= high < 1, got [{low}, {high}]"
            )));
        }
        if self.target_prop.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "target_prop must have 2 entries, got {}",
                self.target_prop.len()
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        ProportionVector::on_simplex(self.target_prop.clone())
            .map_err(|e| Error::InvalidParameter(format!("target_prop: {e}")))?;
        Ok(())
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.dim], vec![self.separation; self.dim]]
    }
}

/// Held-out target ground truth. Only evaluation code reads this.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTruth {
    pub labels: Vec<usize>,
    pub proportions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: Vec<LabeledDataset>,
    pub target: Array2<f64>,
    pub truth: TargetTruth,
    /// Requested class proportions of each source.
    pub source_proportions: Vec<Vec<f64>>,
    pub seed: u64,
    pub params: ScenarioParams,
}

impl Scenario {
    pub fn num_classes(&self) -> usize {
        self.truth.proportions.len()
    }
}

/// K labeled Gaussian sources with random proportions and one target at fixed
/// proportions.
pub fn gen_multisource_scenario(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let means = params.means();
    let [low, high] = params.prop_range;

    let mut prop_rng = stream_rng(seed, PROPORTION_STREAM);
    let source_proportions: Vec<Vec<f64>> = (0..params.num_sources)
        .map(|_| {
            let p0 = prop_rng.random_range(low..=high);
            vec![p0, 1.0 - p0]
        })
        .collect();

    let sources = source_proportions
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = stream_rng(seed, FIRST_SOURCE_STREAM + k as u64);
            let h = ProportionVector::on_simplex(p.clone())?;
            gen_gaussian_classes(params.n_source, &h, &means, params.sigma, &mut rng).map_err(|e| match e {
                Error::MissingClass { class, .. } => Error::MissingClass { domain: k, class },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream_rng(seed, TARGET_STREAM);
    let target_h = ProportionVector::on_simplex(params.target_prop.clone())?;
    let target = gen_gaussian_classes(params.n_target, &target_h, &means, params.sigma, &mut rng)?;
    let proportions = target.class_proportions(2);

    Ok(Scenario {
        sources,
        target: target.points,
        truth: TargetTruth {
            labels: target.labels,
            proportions,
        },
        source_proportions,
        seed,
        params: params.clone(),
    })
}
