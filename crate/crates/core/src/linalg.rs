//! Thin wrappers over faer's dense Cholesky used throughout the crate.

use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Starting jitter relative to the mean diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Lower Cholesky factor `A = L Lᵀ`, possibly of `A + jitter·I`.
pub struct Cholesky {
    llt: Llt<f64>,
    jitter: f64,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky")
            .field("n", &self.dim())
            .field("jitter", &self.jitter)
            .finish()
    }
}

impl Cholesky {
    /// Plain factorization, `None` when `a` is not numerically positive definite.
    pub fn factor(a: &Mat<f64>) -> Option<Self> {
        let llt = a.llt(Side::Lower).ok()?;
        let chol = Self { llt, jitter: 0.0 };
        chol.is_finite().then_some(chol)
    }

    /// Factorization with escalating diagonal jitter: `1e-10·mean(diag)`,
    /// multiplied by ten each retry up to `1e-6·mean(diag)`.
    pub fn factor_with_jitter(a: &Mat<f64>) -> Result<Self> {
        if let Some(c) = Self::factor(a) {
            return Ok(c);
        }
        let n = a.nrows();
        let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
        let mut rel = JITTER_START;
        let mut shifted = a.clone();
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            let jitter = rel * mean_diag.abs().max(f64::MIN_POSITIVE);
            for i in 0..n {
                shifted[(i, i)] = a[(i, i)] + jitter;
            }
            if let Some(mut c) = Self::factor(&shifted) {
                log::debug!("Cholesky needed jitter {jitter:e}");
                c.jitter = jitter;
                return Ok(c);
            }
            rel *= 10.0;
        }
        Err(Error::NotPositiveDefinite {
            jitter: JITTER_MAX * mean_diag,
        })
    }

    fn is_finite(&self) -> bool {
        let l = self.llt.L();
        (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0)
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }

    /// `log|A| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `A⁻¹ B`.
    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.llt.solve(b)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let x = self.solve(col(b).as_ref());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let mut x = b.to_owned();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(
            self.llt.L(),
            x.as_mut(),
            Par::rayon(0),
        );
        x
    }

    pub fn solve_lower_vec(&self, b: &[f64]) -> Vec<f64> {
        let x = self.solve_lower(col(b).as_ref());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `L v`.
    pub fn mul_lower_vec(&self, v: &[f64]) -> Vec<f64> {
        let l = self.llt.L();
        let y = l * col(v);
        (0..v.len()).map(|i| y[(i, 0)]).collect()
    }

    pub fn inverse(&self) -> Mat<f64> {
        self.llt.inverse()
    }
}

/// Column matrix from a slice.
pub fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Power-iteration estimate of `‖A‖₂` for symmetric `A`, good to a few
/// percent, which is all the eigenvalue diagnostic needs.
pub fn spectral_norm_estimate(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, non-degenerate start vector.
    let mut v = Mat::from_fn(n, 1, |i, _| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64);
    let mut lambda = 0.0;
    for _ in 0..50 {
        let norm = v.norm_l2();
        if norm == 0.0 {
            break;
        }
        v /= faer::Scale(norm);
        let w = a * &v;
        let next = w.norm_l2();
        let done = (next - lambda).abs() <= 1e-3 * next;
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    // Power iteration approaches ‖A‖₂ from below; the Frobenius norm
    // bounds it from above.
    lambda.max(a.norm_l2() / (n as f64).sqrt())
}
