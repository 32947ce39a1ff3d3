//! Closed-form spectral data of the Hardy operator `L_μ = -Δ + μ|x|^{-2}`.
//!
//! Everything here is radial and explicit: the critical coefficient
//! `μ₀ = -(N-2)²/4`, the exponents `τ±(μ) = -(N-2)/2 ± √(μ-μ₀)`, the
//! source exponent `p*_μ = 1 + 2/(-τ₋)`, the normalization `b_μ`, the two
//! fundamental solutions `Φ_μ`, `Γ_μ` and the radial density of the measure
//! `dμ = Γ_μ dx`.

use serde::{Deserialize, Serialize};

use crate::error::{HslError, Result};

/// `|μ - μ₀|` below this selects the logarithmic (double root) branch.
pub const CRITICAL_MU_TOL: f64 = 1e-13;

/// Returns `μ₀ = -(N-2)²/4`.
pub fn critical_mu(dim: u32) -> Result<f64> {
    if dim < 3 {
        return Err(HslError::InvalidParameter(format!(
            "dimension must be at least 3, got {dim}"
        )));
    }
    let a = f64::from(dim) - 2.0;
    Ok(-a * a / 4.0)
}

/// `Γ(x)` for `x` a positive integer or half-integer, by the recurrence
/// `Γ(x+1) = xΓ(x)` from `Γ(1) = 1` or `Γ(1/2) = √π`.
fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    debug_assert!((2.0 * x - twice).abs() < 1e-12 && twice >= 1.0);
    let (mut acc, mut arg) = if (twice as u64).is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while arg < x - 0.25 {
        acc *= arg;
        arg += 1.0;
    }
    acc
}

/// Surface area of the unit sphere `S^{N-1}`, `2π^{N/2}/Γ(N/2)`.
pub fn sphere_area(dim: u32) -> f64 {
    let half = f64::from(dim) / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    pub mu0: f64,
    pub tau_minus: f64,
    pub tau_plus: f64,
    pub p_star: f64,
    pub b_mu: f64,
    pub sphere_area: f64,
}

/// The problem triple `(N, μ, p)`. Construction validates `N ≥ 3`,
/// `μ ≥ μ₀(N)` and `p > 1`; supercritical `p ≥ p*_μ` is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyParams {
    #[serde(rename = "N")]
    dim: u32,
    mu: f64,
    p: f64,
    #[serde(skip)]
    consts: SpectralConstants,
    #[serde(skip)]
    critical: bool,
}

impl HardyParams {
    pub fn new(dim: u32, mu: f64, p: f64) -> Result<Self> {
        let mu0 = critical_mu(dim)?;
        if !mu.is_finite() || !p.is_finite() {
            return Err(HslError::InvalidParameter("mu and p must be finite".into()));
        }
        if mu < mu0 - CRITICAL_MU_TOL {
            return Err(HslError::InvalidParameter(format!(
                "mu below critical: mu={mu} < mu0={mu0}"
            )));
        }
        if p <= 1.0 {
            return Err(HslError::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        let critical = (mu - mu0).abs() < CRITICAL_MU_TOL;
        let half = (f64::from(dim) - 2.0) / 2.0;
        let root = if critical { 0.0 } else { (mu - mu0).sqrt() };
        let tau_minus = -half - root;
        let tau_plus = -half + root;
        let area = sphere_area(dim);
        let b_mu = if critical { area } else { 2.0 * root * area };
        let consts = SpectralConstants {
            mu0,
            tau_minus,
            tau_plus,
            p_star: 1.0 + 2.0 / (-tau_minus),
            b_mu,
            sphere_area: area,
        };
        Ok(Self {
            dim,
            mu,
            p,
            consts,
            critical,
        })
    }

    /// Same `(N, μ)` with a different source exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.dim, self.mu, p)
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn constants(&self) -> &SpectralConstants {
        &self.consts
    }

    pub fn tau_minus(&self) -> f64 {
        self.consts.tau_minus
    }

    pub fn tau_plus(&self) -> f64 {
        self.consts.tau_plus
    }

    pub fn p_star(&self) -> f64 {
        self.consts.p_star
    }

    pub fn b_mu(&self) -> f64 {
        self.consts.b_mu
    }

    /// True when `μ = μ₀` and `Φ_μ` carries the logarithmic factor.
    pub fn is_critical(&self) -> bool {
        self.critical
    }

    pub fn is_subcritical(&self) -> bool {
        self.p < self.consts.p_star
    }

    /// `N - 2`, the first-order coefficient of `L_μ` in `t = ln r`.
    pub(crate) fn drift(&self) -> f64 {
        f64::from(self.dim) - 2.0
    }

    pub(crate) fn phi_unchecked(&self, r: f64) -> f64 {
        let base = r.powf(self.consts.tau_minus);
        if self.critical {
            -base * r.ln()
        } else {
            base
        }
    }

    pub(crate) fn gamma_unchecked(&self, r: f64) -> f64 {
        r.powf(self.consts.tau_plus)
    }

    pub(crate) fn measure_weight_unchecked(&self, r: f64) -> f64 {
        self.consts.sphere_area * r.powf(f64::from(self.dim) - 1.0 + self.consts.tau_plus)
    }
}

pub fn spectral_constants(params: &HardyParams) -> SpectralConstants {
    params.consts
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(HslError::Domain(format!("radius must be positive and finite, got {r}")))
    }
}

/// Singular fundamental solution: `r^{τ₋}`, or `r^{τ₋}(-ln r)` at `μ = μ₀`.
pub fn phi(params: &HardyParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(params.phi_unchecked(r))
}

/// Regular fundamental solution `r^{τ₊}`.
pub fn gamma(params: &HardyParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(params.gamma_unchecked(r))
}

/// Radial density of `dμ`: `|S^{N-1}| r^{N-1} Γ_μ(r)`.
pub fn measure_weight(params: &HardyParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(params.measure_weight_unchecked(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn critical_mu_values() {
        assert_eq!(critical_mu(3).unwrap(), -0.25);
        assert_eq!(critical_mu(4).unwrap(), -1.0);
        assert_eq!(critical_mu(10).unwrap(), -16.0);
        assert!(matches!(critical_mu(2), Err(HslError::InvalidParameter(_))));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!((sphere_area(6) - PI.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn lions_case() {
        let c = HardyParams::new(3, 0.0, 2.0).unwrap();
        assert_eq!(c.tau_minus(), -1.0);
        assert_eq!(c.tau_plus(), 0.0);
        assert_eq!(c.p_star(), 3.0);
    }

    #[test]
    fn double_root_case() {
        let c = HardyParams::new(3, -0.25, 2.0).unwrap();
        assert!(c.is_critical());
        assert_eq!(c.tau_minus(), -0.5);
        assert_eq!(c.tau_plus(), -0.5);
        assert!((c.b_mu() - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn mu_two_case() {
        let c = HardyParams::new(3, 2.0, 1.5).unwrap();
        assert_eq!(c.tau_minus(), -2.0);
        assert_eq!(c.tau_plus(), 1.0);
        assert_eq!(c.p_star(), 2.0);
        assert!((c.b_mu() - 12.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HardyParams::new(3, -0.3, 2.0).is_err());
        assert!(HardyParams::new(3, 0.0, 1.0).is_err());
        assert!(HardyParams::new(2, 0.0, 2.0).is_err());
        // supercritical p is accepted
        assert!(HardyParams::new(3, 0.0, 4.0).is_ok());
    }

    #[test]
    fn fundamental_solutions() {
        let lions = HardyParams::new(3, 0.0, 2.0).unwrap();
        let crit = HardyParams::new(3, -0.25, 2.0).unwrap();
        let strong = HardyParams::new(3, 2.0, 1.5).unwrap();
        assert!((phi(&lions, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((phi(&crit, 1.0 / E).unwrap() - E.sqrt()).abs() < 1e-14);
        assert_eq!(phi(&crit, 1.0).unwrap(), 0.0);
        assert!((phi(&strong, 0.1).unwrap() - 100.0).abs() < 1e-11);
        assert_eq!(gamma(&lions, 0.3).unwrap(), 1.0);
        assert_eq!(gamma(&strong, 0.5).unwrap(), 0.5);
        let four = HardyParams::new(4, 0.0, 1.5).unwrap();
        assert_eq!(gamma(&four, 0.5).unwrap(), 1.0);
        assert!(phi(&lions, 0.0).is_err());
        assert!(gamma(&lions, -1.0).is_err());
    }

    #[test]
    fn measure_weights() {
        let lions = HardyParams::new(3, 0.0, 2.0).unwrap();
        assert!((measure_weight(&lions, 0.5).unwrap() - PI).abs() < 1e-14);
        let strong = HardyParams::new(3, 2.0, 1.5).unwrap();
        assert!((measure_weight(&strong, 1.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        let four = HardyParams::new(4, -1.0, 1.2).unwrap();
        let want = 2.0 * PI * PI * 0.25;
        assert!((measure_weight(&four, 0.5).unwrap() - want).abs() < 1e-13);
        assert!(measure_weight(&four, 0.0).is_err());
    }
}
