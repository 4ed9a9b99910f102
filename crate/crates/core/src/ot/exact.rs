//! Exact (unregularized) discrete OT for small instances.
//!
//! A dense two-phase simplex with Bland's rule over the `n1 * n2` plan
//! entries. Only meant as a reference for checking the entropic solver, so it
//! refuses instances above [`MAX_VARIABLES`].

use ndarray::{Array2, ArrayView1};

use super::{CostMatrix, Coupling};
use crate::error::{Error, Result};

pub const MAX_VARIABLES: usize = 400;

const PIVOT_TOL: f64 = 1e-12;

/// Minimum of `<gamma, C>` over the transport polytope of `(a, b)`.
pub fn exact_ot_oracle(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, cost: &CostMatrix) -> Result<f64> {
    let plan = exact_ot(a, b, cost)?;
    super::transport_cost(plan.values(), cost)
}

/// An optimal plan for the unregularized problem.
pub fn exact_ot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, cost: &CostMatrix) -> Result<Coupling> {
    let (n1, n2) = cost.shape();
    if a.len() != n1 || b.len() != n2 {
        return Err(Error::InvalidInput(format!(
            "marginals of length {} and {} for a {n1}x{n2} cost",
            a.len(),
            b.len()
        )));
    }
    if n1 * n2 > MAX_VARIABLES {
        return Err(Error::InvalidInput(format!(
            "exact OT limited to {MAX_VARIABLES} plan entries, got {}",
            n1 * n2
        )));
    }
    if a.iter().chain(b.iter()).any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidInput("marginals must be nonnegative".into()));
    }
    if (a.sum() - b.sum()).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "marginals carry different mass: {} vs {}",
            a.sum(),
            b.sum()
        )));
    }

    let nvars = n1 * n2;
    let rhs: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n1 + n2);
    for i in 0..n1 {
        let mut r = vec![0.0; nvars];
        for j in 0..n2 {
            r[i * n2 + j] = 1.0;
        }
        rows.push(r);
    }
    for j in 0..n2 {
        let mut r = vec![0.0; nvars];
        for i in 0..n1 {
            r[i * n2 + j] = 1.0;
        }
        rows.push(r);
    }
    let costs: Vec<f64> = cost.values().iter().copied().collect();

    let x = Simplex::new(rows, rhs).minimize(&costs)?;
    let plan = Array2::from_shape_vec((n1, n2), x)
        .expect("solution length matches plan shape")
        .mapv(|v| v.max(0.0));
    Ok(Coupling::from_raw(plan))
}

/// Tableau for `min c^T x  s.t.  A x = b, x >= 0` with `b >= 0`.
struct Simplex {
    // m rows of [A | I_artificial | b]
    tableau: Vec<Vec<f64>>,
    basis: Vec<usize>,
    nvars: usize,
}

impl Simplex {
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let m = a.len();
        let nvars = a.first().map_or(0, Vec::len);
        let tableau = a
            .into_iter()
            .zip(b)
            .enumerate()
            .map(|(i, (mut row, bi))| {
                row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
                row.push(bi);
                row
            })
            .collect();
        Self {
            tableau,
            basis: (nvars..nvars + m).collect(),
            nvars,
        }
    }

    fn width(&self) -> usize {
        self.nvars + self.tableau.len()
    }

    fn minimize(mut self, costs: &[f64]) -> Result<Vec<f64>> {
        let m = self.tableau.len();
        let w = self.width();

        // Phase 1: drive the artificial variables to zero.
        let mut obj = vec![0.0; w + 1];
        for row in &self.tableau {
            for j in 0..self.nvars {
                obj[j] -= row[j];
            }
            obj[w] -= row[w];
        }
        self.run(&mut obj, w)?;
        if -obj[w] > 1e-9 {
            return Err(Error::InvalidInput("transport polytope is empty".into()));
        }
        for i in 0..m {
            if self.basis[i] >= self.nvars {
                if let Some(j) = (0..self.nvars).find(|&j| self.tableau[i][j].abs() > 1e-9) {
                    self.pivot(i, j, &mut obj);
                }
            }
        }

        // Phase 2 on the original costs; artificials may no longer enter.
        let mut obj = vec![0.0; w + 1];
        obj[..self.nvars].copy_from_slice(costs);
        for (i, row) in self.tableau.iter().enumerate() {
            let cb = if self.basis[i] < self.nvars {
                costs[self.basis[i]]
            } else {
                0.0
            };
            if cb != 0.0 {
                for (o, r) in obj.iter_mut().zip(row) {
                    *o -= cb * r;
                }
            }
        }
        self.run(&mut obj, self.nvars)?;

        let mut x = vec![0.0; self.nvars];
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.nvars {
                x[bv] = self.tableau[i][w];
            }
        }
        Ok(x)
    }

    /// Pivots until no column below `enter_limit` has a negative reduced cost.
    fn run(&mut self, obj: &mut [f64], enter_limit: usize) -> Result<()> {
        let w = self.width();
        // Bland's rule terminates; the cap only guards against a logic error.
        for _ in 0..100_000 {
            let Some(col) = (0..enter_limit).find(|&j| obj[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.tableau.iter().enumerate() {
                if row[col] > PIVOT_TOL {
                    let ratio = row[w] / row[col];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_TOL || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::InvalidInput("linear program is unbounded".into()));
            };
            self.pivot(row, col, obj);
        }
        Err(Error::InvalidInput("simplex iteration limit reached".into()))
    }

    fn pivot(&mut self, row: usize, col: usize, obj: &mut [f64]) {
        let p = self.tableau[row][col];
        for v in self.tableau[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.tableau[row].clone();
        for (i, r) in self.tableau.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[col];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_by_one() {
        let c = CostMatrix::new(array![[2.5]]).unwrap();
        let v = exact_ot_oracle(array![1.0].view(), array![1.0].view(), &c).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn identity_permutation_is_free() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let u = array![0.5, 0.5];
        let plan = exact_ot(u.view(), u.view(), &c).unwrap();
        assert!(plan.values()[[0, 0]] > 0.49 && plan.values()[[1, 1]] > 0.49);
        let v = exact_ot_oracle(u.view(), u.view(), &c).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn non_uniform_marginals() {
        // All of a's first unit must go somewhere; cheapest split is forced.
        let c = CostMatrix::new(array![[1.0, 3.0], [2.0, 1.0]]).unwrap();
        let a = array![0.7, 0.3];
        let b = array![0.4, 0.6];
        // 0.4 to (0,0), 0.3 to (0,1), 0.3 to (1,1): 0.4 + 0.9 + 0.3 = 1.6
        let v = exact_ot_oracle(a.view(), b.view(), &c).unwrap();
        assert!((v - 1.6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_mass_mismatch_and_large() {
        let c = CostMatrix::new(array![[1.0, 1.0]]).unwrap();
        assert!(exact_ot(array![1.0].view(), array![0.2, 0.2].view(), &c).is_err());
        let big = CostMatrix::new(Array2::zeros((21, 20))).unwrap();
        let a = ndarray::Array1::from_elem(21, 1.0 / 21.0);
        let b = ndarray::Array1::from_elem(20, 1.0 / 20.0);
        assert!(exact_ot(a.view(), b.view(), &big).is_err());
    }
}
