//! Tridiagonal linear algebra used by every solver in the crate.

use crate::error::{HslError, Result};

/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas factorization. Fails if a pivot is tiny compared with the
    /// row scale; callers fall back to [`Tridiagonal::solve_pivoted`].
    pub fn factor(&self) -> Result<ThomasLu> {
        let n = self.len();
        let mut denom = vec![0.0; n];
        let mut cprime = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i] * cprime[i - 1]
            };
            let scale = self.diag[i].abs() + self.lower[i].abs() + self.upper[i].abs();
            if !d.is_finite() || d.abs() <= 1e-14 * scale {
                return Err(HslError::Numeric(format!("vanishing pivot at row {i}")));
            }
            denom[i] = d;
            cprime[i] = if i + 1 < n { self.upper[i] / d } else { 0.0 };
        }
        Ok(ThomasLu {
            lower: self.lower.clone(),
            denom,
            cprime,
        })
    }

    /// Gaussian elimination with partial pivoting (one extra band of fill).
    pub fn solve_pivoted(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        // rows stored as (a0, a1, a2) for columns (i, i+1, i+2)
        let mut rows: Vec<[f64; 3]> = (0..n)
            .map(|i| [self.diag[i], if i + 1 < n { self.upper[i] } else { 0.0 }, 0.0])
            .collect();
        let mut sub: Vec<f64> = (0..n).map(|i| if i > 0 { self.lower[i] } else { 0.0 }).collect();
        let mut b = rhs.to_vec();
        for i in 0..n {
            if i + 1 < n && sub[i + 1].abs() > rows[i][0].abs() {
                // swap row i and row i+1, re-aligning row i+1 to start at column i
                let next = [sub[i + 1], rows[i + 1][0], rows[i + 1][1]];
                let cur = rows[i];
                rows[i] = next;
                sub[i + 1] = cur[0];
                rows[i + 1] = [cur[1], cur[2], 0.0];
                b.swap(i, i + 1);
            }
            let piv = rows[i][0];
            if piv == 0.0 || !piv.is_finite() {
                return Err(HslError::Internal(format!("singular tridiagonal system at row {i}")));
            }
            if i + 1 < n {
                let m = sub[i + 1] / piv;
                rows[i + 1][0] -= m * rows[i][1];
                rows[i + 1][1] -= m * rows[i][2];
                b[i + 1] -= m * b[i];
                sub[i + 1] = 0.0;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= rows[i][1] * x[i + 1];
            }
            if i + 2 < n {
                s -= rows[i][2] * x[i + 2];
            }
            x[i] = s / rows[i][0];
        }
        Ok(x)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.factor() {
            Ok(lu) => Ok(lu.solve(rhs)),
            Err(_) => self.solve_pivoted(rhs),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ThomasLu {
    lower: Vec<f64>,
    denom: Vec<f64>,
    cprime: Vec<f64>,
}

impl ThomasLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.denom.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { self.lower[i] * y[i - 1] };
            y[i] = (rhs[i] - prev) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.cprime[i] * y[i + 1];
        }
        y
    }

    /// All pivots positive: for a symmetric matrix this certifies definiteness.
    pub fn all_pivots_positive(&self) -> bool {
        self.denom.iter().all(|&d| d > 0.0)
    }
}
