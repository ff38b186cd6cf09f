//! Incremental inverses for linear systems whose unknowns come and go.
//!
//! Activating an element of a discretized structure appends one row and
//! column to the reduced system matrix; deactivating removes them. Both are
//! rank-1 perturbations of the inverse: a bordered update with a Schur
//! complement on addition, a pivot-scaled outer-product downdate on removal.
//! [`InverseState`] tracks the inverse across such flips in O(n²) per flip
//! instead of O(n³) for a fresh factorization, re-factorizing on a fixed
//! cadence to keep rounding drift bounded.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

/// Magnitudes below this make an update pivot unusable and the flip is
/// reported as numerically infeasible instead of being applied.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Accepted flips between two direct re-factorizations.
pub const REFACTOR_EVERY: usize = 64;

/// Inverse of `(A + u vᵀ)` from the inverse of `A`:
/// `A⁻¹ − (A⁻¹u)(vᵀA⁻¹) / (1 + vᵀA⁻¹u)`.
///
/// Fails with [`Error::Singular`] when the denominator falls below
/// [`SINGULARITY_TOL`] in magnitude. Note the *unconjugated* products: the
/// systems handled here are complex symmetric, not Hermitian.
pub fn sherman_morrison(
    inv: &DMatrix<Complex64>,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let inv_u = inv * u;
    let vt_inv = inv.tr_mul(v); // (vᵀ A⁻¹)ᵀ, no conjugation
    let denom = Complex64::new(1.0, 0.0) + v.dot(&inv_u);
    if denom.norm() < SINGULARITY_TOL {
        return Err(Error::Singular(format!(
            "rank-1 update denominator {denom} below tolerance"
        )));
    }
    let mut out = inv.clone();
    for i in 0..inv.nrows() {
        for j in 0..inv.ncols() {
            out[(i, j)] -= inv_u[i] * vt_inv[j] / denom;
        }
    }
    Ok(out)
}

/// The inverse of one principal submatrix of a fixed complex-symmetric
/// system, updated incrementally as indices activate and deactivate.
#[derive(Debug, Clone)]
pub struct InverseState {
    full: Arc<DMatrix<Complex64>>,
    /// Active indices of `full`, in activation order; `inv` follows this
    /// ordering.
    active: Vec<usize>,
    inv: DMatrix<Complex64>,
    updates_since_refactor: usize,
}

impl InverseState {
    /// Factorize the principal submatrix of `full` selected by `active`.
    pub fn new(full: Arc<DMatrix<Complex64>>, active: &[usize]) -> Result<Self> {
        if full.nrows() != full.ncols() {
            return Err(Error::contract("system matrix must be square"));
        }
        if active.is_empty() {
            return Err(Error::contract("inverse state needs at least one active index"));
        }
        let mut seen = vec![false; full.nrows()];
        for &k in active {
            if k >= full.nrows() {
                return Err(Error::contract(format!(
                    "active index {k} out of range for {}×{} system",
                    full.nrows(),
                    full.ncols()
                )));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::contract(format!("duplicate active index {k}")));
            }
        }
        let mut state = InverseState {
            full,
            active: active.to_vec(),
            inv: DMatrix::zeros(0, 0),
            updates_since_refactor: 0,
        };
        state.refactor()?;
        Ok(state)
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// The tracked inverse, rows/columns ordered like [`InverseState::active`].
    pub fn inverse(&self) -> &DMatrix<Complex64> {
        &self.inv
    }

    /// Solve the reduced system for a right-hand side given in `active`
    /// order: one matrix-vector product with the tracked inverse.
    pub fn solve(&self, rhs: &DVector<Complex64>) -> DVector<Complex64> {
        &self.inv * rhs
    }

    /// Activate index `k`: border the inverse by one row and column.
    pub fn add(&mut self, k: usize) -> Result<()> {
        if self.active.contains(&k) {
            return Err(Error::contract(format!("index {k} is already active")));
        }
        if k >= self.full.nrows() {
            return Err(Error::contract(format!("index {k} out of range")));
        }
        let n = self.active.len();
        let b = DVector::from_fn(n, |i, _| self.full[(self.active[i], k)]);
        let d = self.full[(k, k)];
        let z = &self.inv * &b;
        // Schur complement of the bordered system; b doubles as the new row
        // because the full matrix is symmetric.
        let s = d - b.dot(&z);
        if s.norm() < SINGULARITY_TOL {
            return Err(Error::Singular(format!(
                "bordering pivot {s} below tolerance while activating index {k}"
            )));
        }
        let mut next = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                next[(i, j)] = self.inv[(i, j)] + z[i] * z[j] / s;
            }
            next[(i, n)] = -z[i] / s;
            next[(n, i)] = -z[i] / s;
        }
        next[(n, n)] = Complex64::new(1.0, 0.0) / s;
        self.inv = next;
        self.active.push(k);
        self.after_update()
    }

    /// Deactivate index `k`: downdate by the outer product of its inverse
    /// column, then drop the row and column.
    pub fn remove(&mut self, k: usize) -> Result<()> {
        if self.active.len() == 1 {
            return Err(Error::contract(
                "cannot remove the last active index; drop the state instead",
            ));
        }
        let p = self
            .active
            .iter()
            .position(|&a| a == k)
            .ok_or_else(|| Error::contract(format!("index {k} is not active")))?;
        let pivot = self.inv[(p, p)];
        if pivot.norm() < SINGULARITY_TOL {
            return Err(Error::Singular(format!(
                "removal pivot {pivot} below tolerance while deactivating index {k}"
            )));
        }
        let n = self.active.len();
        let mut next = DMatrix::zeros(n - 1, n - 1);
        let (mut ii, mut jj);
        ii = 0;
        for i in 0..n {
            if i == p {
                continue;
            }
            jj = 0;
            for j in 0..n {
                if j == p {
                    continue;
                }
                next[(ii, jj)] = self.inv[(i, j)] - self.inv[(i, p)] * self.inv[(p, j)] / pivot;
                jj += 1;
            }
            ii += 1;
        }
        self.inv = next;
        self.active.remove(p);
        self.after_update()
    }

    /// Relative residual `‖inv·A_active − I‖_F / √n` of the tracked inverse.
    pub fn validate(&self) -> f64 {
        let n = self.active.len();
        let mut residual = &self.inv * self.sub_matrix();
        for i in 0..n {
            residual[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        residual.norm() / (n as f64).sqrt()
    }

    /// Re-factorize the active submatrix directly, discarding accumulated
    /// update drift.
    pub fn refactor(&mut self) -> Result<()> {
        let sub = self.sub_matrix();
        let inv = sub.clone().lu().try_inverse().ok_or_else(|| {
            Error::Singular(format!(
                "reduced {0}×{0} system is singular under direct factorization",
                self.active.len()
            ))
        })?;
        self.inv = inv;
        self.updates_since_refactor = 0;
        Ok(())
    }

    fn sub_matrix(&self) -> DMatrix<Complex64> {
        let n = self.active.len();
        DMatrix::from_fn(n, n, |i, j| self.full[(self.active[i], self.active[j])])
    }

    fn after_update(&mut self) -> Result<()> {
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFACTOR_EVERY {
            debug_assert!(
                self.validate() < 1e-6,
                "inverse drifted past the validation guard before refactorization"
            );
            self.refactor()?;
        }
        Ok(())
    }
}
