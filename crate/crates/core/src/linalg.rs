//! Small dense symmetric solves used by the fitting routines and kernels.
//!
//! Everything here operates on row-major `Vec<f64>` buffers of modest size
//! (at most `n x n` with `n` the sample size), so a hand-rolled pivoted
//! Cholesky is plenty and keeps the singularity threshold explicit.

/// Relative pivot threshold: a factorization step whose pivot falls at or
/// below `REL_PIVOT_TOL * max(initial diagonal)` declares the matrix singular.
pub(crate) const REL_PIVOT_TOL: f64 = 1e-10;

/// Diagonally pivoted Cholesky factorization `P A P^T = L L^T` of a
/// symmetric positive definite matrix.
pub(crate) struct PivotedCholesky {
    l: Vec<f64>,
    perm: Vec<usize>,
    m: usize,
}

/// Factorizes `a` (row-major, `m x m`, symmetric). Returns `None` when a
/// pivot falls below the relative threshold (rank-deficient input).
pub(crate) fn pivoted_cholesky(a: &[f64], m: usize) -> Option<PivotedCholesky> {
    debug_assert_eq!(a.len(), m * m);
    let mut w = a.to_vec();
    let mut perm: Vec<usize> = (0..m).collect();
    let max_diag = (0..m).map(|i| w[i * m + i]).fold(0.0f64, f64::max);
    let threshold = REL_PIVOT_TOL * max_diag;

    for k in 0..m {
        // pick the largest remaining diagonal entry as the pivot
        let mut q = k;
        for i in k + 1..m {
            if w[i * m + i] > w[q * m + q] {
                q = i;
            }
        }
        if q != k {
            perm.swap(k, q);
            for j in 0..m {
                w.swap(k * m + j, q * m + j);
            }
            for i in 0..m {
                w.swap(i * m + k, i * m + q);
            }
        }
        let pivot = w[k * m + k];
        if !(pivot > threshold) || !pivot.is_finite() {
            return None;
        }
        let lkk = pivot.sqrt();
        w[k * m + k] = lkk;
        for i in k + 1..m {
            w[i * m + k] /= lkk;
        }
        // keep the trailing block symmetric so later pivot swaps stay valid
        for i in k + 1..m {
            let lik = w[i * m + k];
            for j in k + 1..=i {
                let v = w[i * m + j] - lik * w[j * m + k];
                w[i * m + j] = v;
                w[j * m + i] = v;
            }
        }
    }

    Some(PivotedCholesky { l: w, perm, m })
}

impl PivotedCholesky {
    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        debug_assert_eq!(b.len(), m);
        let mut z = self.forward(b);
        // back substitution L^T w = z
        for i in (0..m).rev() {
            let mut s = z[i];
            for k in i + 1..m {
                s -= self.l[k * m + i] * z[k];
            }
            z[i] = s / self.l[i * m + i];
        }
        let mut x = vec![0.0; m];
        for i in 0..m {
            x[self.perm[i]] = z[i];
        }
        x
    }

    /// Quadratic form `b^T A^-1 b` via a single forward substitution.
    pub(crate) fn quad_form(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().map(|z| z * z).sum()
    }

    /// `ln det A`.
    pub(crate) fn log_det(&self) -> f64 {
        let m = self.m;
        2.0 * (0..m).map(|i| self.l[i * m + i].ln()).sum::<f64>()
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut z = vec![0.0; m];
        for i in 0..m {
            let mut s = b[self.perm[i]];
            for k in 0..i {
                s -= self.l[i * m + k] * z[k];
            }
            z[i] = s / self.l[i * m + i];
        }
        z
    }
}
