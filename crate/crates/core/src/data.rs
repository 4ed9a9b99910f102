use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Points (one per row) with dense class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(points: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    /// Empirical class proportions over `num_classes` classes.
    pub fn class_proportions(&self, num_classes: usize) -> Vec<f64> {
        let mut counts = vec![0.0; num_classes];
        for &y in &self.labels {
            if y < num_classes {
                counts[y] += 1.0;
            }
        }
        let n = self.len() as f64;
        counts.iter().map(|c| c / n).collect()
    }

    /// Stacks several datasets into one, in order.
    pub fn concat(parts: &[LabeledDataset]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("nothing to concatenate".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.points.view()).collect();
        let points =
            concatenate(Axis(0), &views).map_err(|e| Error::InvalidInput(format!("cannot stack datasets: {e}")))?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        Self::new(points, labels)
    }

    /// Number of classes implied by the largest label.
    pub fn inferred_num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}
