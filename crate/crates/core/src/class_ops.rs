//! Conversions between per-instance masses and per-class proportions.
//!
//! `d1` (C × n) sums instance masses per class; `d2` (n × C) spreads a class
//! proportion evenly over that class's instances. `d1 · d2` is the identity.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class proportions (`h`). Entries are nonnegative; they need not sum to one
/// mid-solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProportionVector(Vec<f64>);

impl ProportionVector {
    pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty proportion vector".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "proportions must be finite and nonnegative: {values:?}"
            )));
        }
        Ok(Self(values))
    }

    /// Like [`ProportionVector::new`] but also requires the entries to sum to one.
    pub fn on_simplex(values: Vec<f64>) -> Result<Self> {
        let h = Self::new(values)?;
        if !h.is_simplex() {
            return Err(Error::InvalidInput(format!(
                "proportions must sum to 1, got {}",
                h.sum()
            )));
        }
        Ok(h)
    }

    pub fn uniform(num_classes: usize) -> Self {
        Self(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_simplex(&self) -> bool {
        (self.sum() - 1.0).abs() <= Self::SIMPLEX_TOLERANCE
    }

    /// Rescaled to sum to one.
    pub fn normalized(&self) -> Self {
        let s = self.sum();
        Self(self.0.iter().map(|v| v / s).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProportionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassOperators {
    d1: Array2<f64>,
    d2: Array2<f64>,
    class_counts: Vec<usize>,
    labels: Vec<usize>,
}

impl ClassOperators {
    pub fn d1(&self) -> &Array2<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &Array2<f64> {
        &self.d2
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    /// `d1 · m` without materializing the product.
    pub fn aggregate(&self, m: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut h = Array1::zeros(self.num_classes());
        for (&y, &mi) in self.labels.iter().zip(m.iter()) {
            h[y] += mi;
        }
        h
    }

    /// `d2 · h` without materializing the product.
    pub fn distribute(&self, h: &[f64]) -> Array1<f64> {
        let share: Vec<f64> = h
            .iter()
            .zip(&self.class_counts)
            .map(|(hc, &count)| hc / count as f64)
            .collect();
        self.labels.iter().map(|&y| share[y]).collect()
    }
}

/// Builds `d1`/`d2` for one domain. Every class in `0..num_classes` must occur.
pub fn build_class_operators(labels: &[usize], num_classes: usize) -> Result<ClassOperators> {
    build_for_domain(labels, num_classes, 0)
}

/// Same as [`build_class_operators`], tagging errors with a domain index.
pub fn build_for_domain(labels: &[usize], num_classes: usize, domain: usize) -> Result<ClassOperators> {
    if labels.is_empty() {
        return Err(Error::InvalidInput(format!("domain {domain} has no instances")));
    }
    if num_classes == 0 {
        return Err(Error::InvalidParameter("num_classes must be at least 1".into()));
    }
    let mut class_counts = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::InvalidInput(format!(
                "domain {domain}: label {y} at instance {i} outside 0..{num_classes}"
            )));
        }
        class_counts[y] += 1;
    }
    if let Some(class) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass { domain, class });
    }

    let n = labels.len();
    let mut d1 = Array2::zeros((num_classes, n));
    let mut d2 = Array2::zeros((n, num_classes));
    for (i, &y) in labels.iter().enumerate() {
        d1[[y, i]] = 1.0;
        d2[[i, y]] = 1.0 / class_counts[y] as f64;
    }
    Ok(ClassOperators {
        d1,
        d2,
        class_counts,
        labels: labels.to_vec(),
    })
}

/// `h = d1 · m`.
pub fn proportions_from_mass(ops: &ClassOperators, m: ArrayView1<'_, f64>) -> Result<ProportionVector> {
    if m.len() != ops.num_instances() {
        return Err(Error::InvalidInput(format!(
            "mass vector has {} entries for {} instances",
            m.len(),
            ops.num_instances()
        )));
    }
    ProportionVector::new(ops.aggregate(m).to_vec())
}

/// `m = d2 · h`.
pub fn mass_from_proportions(ops: &ClassOperators, h: &ProportionVector) -> Result<Array1<f64>> {
    if h.len() != ops.num_classes() {
        return Err(Error::InvalidInput(format!(
            "proportion vector has {} entries for {} classes",
            h.len(),
            ops.num_classes()
        )));
    }
    Ok(ops.distribute(h.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn five() -> ClassOperators {
        build_class_operators(&[0, 0, 0, 1, 1], 2).unwrap()
    }

    #[test]
    fn five_element_operators() {
        let ops = five();
        assert_eq!(ops.d1(), &array![[1., 1., 1., 0., 0.], [0., 0., 0., 1., 1.]]);
        let t = 1.0 / 3.0;
        assert_eq!(ops.d2(), &array![[t, 0.], [t, 0.], [t, 0.], [0., 0.5], [0., 0.5]]);
        assert_eq!(ops.d1().dot(ops.d2()), Array2::<f64>::eye(2));
    }

    #[test]
    fn five_element_round_trip() {
        let ops = five();
        let m = Array1::from_elem(5, 0.2);
        let h = proportions_from_mass(&ops, m.view()).unwrap();
        assert!((h[0] - 0.6).abs() < 1e-15 && (h[1] - 0.4).abs() < 1e-15);
        let back = mass_from_proportions(&ops, &ProportionVector::new(vec![0.6, 0.4]).unwrap()).unwrap();
        for v in back {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_mass() {
        let ops = five();
        let h = proportions_from_mass(&ops, array![0.0, 1.0, 0.0, 0.0, 0.0].view()).unwrap();
        assert_eq!(h.values(), &[1.0, 0.0]);
        let m = mass_from_proportions(&ops, &ProportionVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(m.to_vec(), vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
    }

    #[test]
    fn trivial_single_class() {
        let ops = build_class_operators(&[0], 1).unwrap();
        assert_eq!(ops.d1(), &array![[1.0]]);
        assert_eq!(ops.d2(), &array![[1.0]]);
        let ops = build_class_operators(&[1, 0], 2).unwrap();
        assert_eq!(ops.d1().dot(ops.d2()), Array2::<f64>::eye(2));
    }

    #[test]
    fn missing_class_is_named() {
        let err = build_class_operators(&[0, 0, 2], 3).unwrap_err();
        assert!(matches!(err, Error::MissingClass { class: 1, domain: 0 }));
        let err = build_for_domain(&[1, 1], 2, 4).unwrap_err();
        assert!(matches!(err, Error::MissingClass { class: 0, domain: 4 }));
    }

    #[test]
    fn out_of_range_label() {
        assert!(matches!(build_class_operators(&[0, 5], 2), Err(Error::InvalidInput(_))));
    }

    fn labels_and_h() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
        (1usize..=5).prop_flat_map(|c| {
            let labels = proptest::collection::vec(0..c, c..=50).prop_map(move |mut l| {
                // make every class present
                for (k, y) in l.iter_mut().take(c).enumerate() {
                    *y = k;
                }
                l
            });
            let h = proptest::collection::vec(0.01f64..1.0, c).prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<_>>()
            });
            (labels, h)
        })
    }

    proptest! {
        #[test]
        fn mass_round_trip((labels, h) in labels_and_h()) {
            let c = h.len();
            let ops = build_class_operators(&labels, c).unwrap();
            let h = ProportionVector::new(h).unwrap();
            let m = mass_from_proportions(&ops, &h).unwrap();
            prop_assert!((m.sum() - h.sum()).abs() <= 1e-12);
            for (&y, &mi) in labels.iter().zip(m.iter()) {
                prop_assert_eq!(mi, h[y] / ops.class_counts()[y] as f64);
            }
            let back = proportions_from_mass(&ops, m.view()).unwrap();
            for (a, b) in back.values().iter().zip(h.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let dense = ops.d2().dot(&Array1::from(h.values().to_vec()));
            for (a, b) in dense.iter().zip(m.iter()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }
}
