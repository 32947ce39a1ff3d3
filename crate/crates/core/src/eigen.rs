//! Smallest eigenpair of `T Y = σ W Y` for the symmetric positive definite
//! tridiagonal `T` and a nonnegative diagonal weight `W`.

use crate::error::{HslError, Result};
use crate::tridiag::Tridiagonal;

pub(crate) const MAX_SWEEPS: usize = 500;
pub(crate) const RESIDUAL_TOL: f64 = 1e-8;

/// Plain inverse sweeps before a certified shift is attempted.
const PLAIN_SWEEPS: usize = 12;

fn rayleigh(t: &Tridiagonal, w: &[f64], y: &[f64]) -> f64 {
    let ty = t.mul(y);
    let num: f64 = y.iter().zip(&ty).map(|(a, b)| a * b).sum();
    let den: f64 = y.iter().zip(w).map(|(a, b)| a * a * b).sum();
    num / den
}

fn residual(t: &Tridiagonal, w: &[f64], y: &[f64], sigma: f64) -> f64 {
    let ty = t.mul(y);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..y.len() {
        let wy = w[i] * y[i];
        num = num.max((ty[i] - sigma * wy).abs());
        den = den.max(wy.abs());
    }
    num / (sigma * den)
}

fn normalize(y: &mut [f64]) {
    let m = y.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if m != 0.0 {
        y.iter_mut().for_each(|v| *v /= m);
    }
}

/// Returns `(σ, Y)` with `Y` max-normalized to 1 and positive, or `None`
/// when `W ≡ 0` (σ = +∞).
pub(crate) fn smallest_generalized(t: &Tridiagonal, w: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    if w.iter().all(|&x| x == 0.0) {
        return Ok(None);
    }
    let lu = t
        .factor()
        .map_err(|e| HslError::Internal(format!("eigen-solve operator not invertible: {e}")))?;
    let n = t.len();
    let mut y: Vec<f64> = w.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    // seed with a smooth positive profile so components outside supp W are present
    for (i, v) in y.iter_mut().enumerate() {
        *v += ((i as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).sin();
    }
    let mut sigma = f64::INFINITY;
    for sweep in 0..MAX_SWEEPS {
        let rhs: Vec<f64> = y.iter().zip(w).map(|(a, b)| a * b).collect();
        let mut next = if sweep >= PLAIN_SWEEPS && sigma.is_finite() {
            shifted_solve(t, w, sigma, &rhs).unwrap_or_else(|| lu.solve(&rhs))
        } else {
            lu.solve(&rhs)
        };
        normalize(&mut next);
        y = next;
        sigma = rayleigh(t, w, &y);
        if residual(t, w, &y, sigma) < RESIDUAL_TOL {
            if y.iter().any(|&v| v < -1e-12) {
                return Err(HslError::Numeric("principal eigenvector changed sign".into()));
            }
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            return Ok(Some((sigma, y)));
        }
    }
    Err(HslError::Numeric(format!(
        "inverse iteration did not converge in {MAX_SWEEPS} sweeps"
    )))
}

/// Solves `(T - sW) x = rhs` with `s` just below the current Rayleigh
/// quotient, provided the shifted matrix is certified positive definite.
fn shifted_solve(t: &Tridiagonal, w: &[f64], sigma: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    for frac in [0.999, 0.99, 0.9] {
        let s = frac * sigma;
        let shifted = Tridiagonal {
            lower: t.lower.clone(),
            diag: t.diag.iter().zip(w).map(|(d, x)| d - s * x).collect(),
            upper: t.upper.clone(),
        };
        if let Ok(lu) = shifted.factor() {
            if lu.all_pivots_positive() {
                return Some(lu.solve(rhs));
            }
        }
    }
    None
}
