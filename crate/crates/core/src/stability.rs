//! Stability ratio `σ₁ = inf ‖ξ‖²_μ / (p ∫ u^{p-1} ξ² dx)`, the band
//! classification, the quantitative gap along the minimal branch and the
//! uniqueness probe at `κ*`.

use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::eigen::smallest_generalized;
use crate::error::{HslError, Result};
use crate::extremal::BranchPoint;
use crate::grid::{GridFunction, RadialGrid, Stencil};
use crate::hardy::HardyParams;
use crate::mountain_pass::{mountain_pass_solve, MountainPassOptions};

pub const CLASSIFICATION_BAND: f64 = 1e-3;
pub const GAP_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Stable,
    SemiStable,
    Unstable,
}

impl Classification {
    pub fn from_sigma1(sigma1: f64) -> Self {
        if sigma1 > 1.0 + CLASSIFICATION_BAND {
            Classification::Stable
        } else if sigma1 < 1.0 - CLASSIFICATION_BAND {
            Classification::Unstable
        } else {
            Classification::SemiStable
        }
    }
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// `+∞` (serialized as `null`) when `u ≡ 0`.
    #[serde(serialize_with = "finite_or_null")]
    pub sigma1: f64,
    pub classification: Classification,
    #[serde(skip)]
    pub eigenfunction: GridFunction,
}

/// Smallest `σ` of `L_μ ξ = σ p u^{p-1} ξ` with Dirichlet ends.
pub fn sigma1(params: &HardyParams, u: &GridFunction) -> Result<StabilityReport> {
    if u.values().iter().any(|&v| v < 0.0) {
        return Err(HslError::InvalidInput("sigma1 needs u >= 0".into()));
    }
    let grid = u.grid();
    let st = Stencil::new(params, grid);
    let p = params.p();
    let weight: Vec<f64> = grid
        .interior()
        .map(|i| p * grid.radii()[i].powi(2) * u.values()[i].powf(p - 1.0))
        .collect();
    match smallest_generalized(&st.matrix(), &weight)? {
        None => Ok(StabilityReport {
            sigma1: f64::INFINITY,
            classification: Classification::Stable,
            eigenfunction: GridFunction::zeros(grid),
        }),
        Some((s, y)) => {
            let mut values = vec![0.0; grid.len()];
            for (k, i) in grid.interior().enumerate() {
                values[i] = y[k] / st.y_scale[i];
            }
            let m = values.iter().copied().fold(0.0, f64::max);
            values.iter_mut().for_each(|v| *v /= m);
            Ok(StabilityReport {
                sigma1: s,
                classification: Classification::from_sigma1(s),
                eigenfunction: GridFunction::new(Arc::clone(grid), values)?,
            })
        }
    }
}

/// `((κ + κ*)/(2κ))^{p-1}`, the lower bound on `σ₁` at amplitude `κ < κ*`.
pub fn gap_lower_bound(p: f64, kappa: f64, kappa_star: f64) -> f64 {
    ((kappa + kappa_star) / (2.0 * kappa)).powf(p - 1.0)
}

/// True iff `σ₁ ≥ ((κ+κ*)/(2κ))^{p-1}` up to the relative slack.
pub fn quantitative_gap_check(
    params: &HardyParams,
    kappa: f64,
    kappa_star: f64,
    rep: &StabilityReport,
) -> Result<bool> {
    if !(kappa > 0.0 && kappa < kappa_star) {
        return Err(HslError::InvalidParameter(format!(
            "need 0 < kappa < kappa_star, got kappa={kappa}, kappa_star={kappa_star}"
        )));
    }
    let required = gap_lower_bound(params.p(), kappa, kappa_star);
    Ok(rep.sigma1 >= required * (1.0 - GAP_SLACK))
}

/// A mountain-pass point with `sup v/u` on `[0.1, 1)` below this has merged
/// with the minimal solution; the gap closes like `√(κ* − κ)`.
pub const MERGE_THRESHOLD: f64 = 0.1;
const MERGE_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessProbe {
    pub kappa: f64,
    /// A second solution distinct from the given one was found.
    pub second_solution: bool,
    pub level: Option<f64>,
    pub beta: Option<f64>,
    /// `sup v/u` over `[0.1, 1)`, `None` when no critical point was found or `u ≡ 0`.
    pub relative_size: Option<f64>,
    pub detail: String,
}

/// Runs the mountain-pass search above `extremal`. A collapse of the search,
/// or a critical point that has merged with the extremal profile,
/// corroborates uniqueness at `κ*`.
pub fn uniqueness_probe_at_kstar(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    extremal: &BranchPoint,
) -> Result<UniquenessProbe> {
    uniqueness_probe_with(params, grid, extremal, &MountainPassOptions::default())
}

pub fn uniqueness_probe_with(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    point: &BranchPoint,
    opts: &MountainPassOptions,
) -> Result<UniquenessProbe> {
    if point.profile.grid().as_ref() != grid.as_ref() {
        return Err(HslError::InvalidInput("profile lives on a different grid".into()));
    }
    match mountain_pass_solve(params, &point.profile, opts) {
        Ok(out) => {
            let u = point.profile.values();
            let v = out.state.v.values();
            let window: Vec<usize> = grid
                .interior()
                .filter(|&i| grid.radii()[i] >= MERGE_WINDOW)
                .collect();
            let relative_size = if window.iter().all(|&i| u[i] > 0.0) {
                Some(window.iter().map(|&i| v[i] / u[i]).fold(0.0, f64::max))
            } else {
                None
            };
            let merged = relative_size.is_some_and(|s| s < MERGE_THRESHOLD);
            let detail = if merged {
                format!(
                    "mountain-pass point merged with the given profile (sup v/u = {:.3e})",
                    relative_size.unwrap_or(0.0)
                )
            } else {
                format!("mountain-pass critical point at level {:.6e}", out.state.energy)
            };
            Ok(UniquenessProbe {
                kappa: point.kappa,
                second_solution: !merged,
                level: Some(out.state.energy),
                beta: Some(out.beta),
                relative_size,
                detail,
            })
        }
        Err(HslError::NoSecondSolution { level, beta }) => Ok(UniquenessProbe {
            kappa: point.kappa,
            second_solution: false,
            level: level.is_finite().then_some(level),
            beta: beta.is_finite().then_some(beta),
            relative_size: None,
            detail: "mountain-pass search collapsed".into(),
        }),
        Err(e) => Err(e),
    }
}
