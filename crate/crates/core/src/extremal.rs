//! Principal eigenpair, bracketing of the extremal amplitude `κ*` between
//! the certified threshold `k_p` and the eigenfunction bound, and the
//! extremal solution at the convergent end of the bracket.

use std::sync::Arc;

use serde::Serialize;

use crate::classify::fit_singularity;
use crate::eigen::smallest_generalized;
use crate::error::{HslError, Result};
use crate::grid::{integrate_dmu, GridFunction, RadialGrid, Stencil};
use crate::hardy::HardyParams;
use crate::linear::LinearSolver;
use crate::nonlinear::{
    barrier_constant_c6, guaranteed_threshold, IterationOptions, IterationReport, MinimalSolver,
};
use crate::stability::sigma1;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Positive in the interior, zero at both cutoff ends, max-normalized.
    pub phi1: GridFunction,
}

/// Principal Dirichlet eigenpair of `L_μ` on `(r_min, 1)`.
pub fn first_eigenpair(params: &HardyParams, grid: &Arc<RadialGrid>) -> Result<EigenPair> {
    let st = Stencil::new(params, grid);
    let weight: Vec<f64> = grid.interior().map(|i| grid.radii()[i].powi(2)).collect();
    let (lambda1, y) = smallest_generalized(&st.matrix(), &weight)?
        .ok_or_else(|| HslError::Internal("empty eigen weight".into()))?;
    let mut values = vec![0.0; grid.len()];
    for (k, i) in grid.interior().enumerate() {
        values[i] = y[k] / st.y_scale[i];
    }
    let m = values.iter().copied().fold(0.0, f64::max);
    values.iter_mut().for_each(|v| *v /= m);
    Ok(EigenPair {
        lambda1,
        phi1: GridFunction::new(Arc::clone(grid), values)?,
    })
}

/// `φ* = φ₁ Γ_μ⁻¹`.
pub fn phi_star(params: &HardyParams, pair: &EigenPair) -> Result<GridFunction> {
    let grid = pair.phi1.grid();
    let values = grid
        .radii()
        .iter()
        .zip(pair.phi1.values())
        .map(|(&r, &v)| v / params.gamma_unchecked(r))
        .collect();
    GridFunction::new(Arc::clone(grid), values)
}

/// `(4λ₁/3)^{1/(p-1)} (∫φ* dμ / ∫w₀^p φ* dμ)^{1/p}` with `w₀ = S(0, 1)`.
pub fn kstar_upper_bound(params: &HardyParams, pair: &EigenPair) -> Result<f64> {
    if !params.is_subcritical() {
        return Err(HslError::UnsupportedRegime("upper bound needs p < p*".into()));
    }
    let grid = pair.phi1.grid();
    let p = params.p();
    let w0 = LinearSolver::new(params, grid)?.solve(&GridFunction::zeros(grid), 1.0)?;
    let ps = phi_star(params, pair)?;
    let num = integrate_dmu(params, &ps)?;
    let den = integrate_dmu(params, &w0.zip_with(&ps, |w, f| w.max(0.0).powf(p) * f)?)?;
    let bound = (4.0 * pair.lambda1 / 3.0).powf(1.0 / (p - 1.0)) * (num / den).powf(1.0 / p);
    if !(bound.is_finite() && bound > 0.0) {
        return Err(HslError::Numeric(format!("upper bound not finite: {bound}")));
    }
    Ok(bound)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct APrioriEstimate {
    /// `∫u^p φ* dμ / ‖φ*‖_∞`
    pub weighted_lp: f64,
    /// `λ₁^{p/(p-1)} ∫φ* dμ / ‖φ*‖_∞`
    pub bound: f64,
}

impl APrioriEstimate {
    pub fn holds(&self) -> bool {
        self.weighted_lp <= self.bound
    }
}

pub fn a_priori_estimate(params: &HardyParams, u: &GridFunction, pair: &EigenPair) -> Result<APrioriEstimate> {
    let p = params.p();
    let ps = phi_star(params, pair)?;
    let sup = ps.max();
    let weighted = integrate_dmu(params, &u.zip_with(&ps, |a, b| a.max(0.0).powf(p) * b)?)?;
    let mass = integrate_dmu(params, &ps)?;
    Ok(APrioriEstimate {
        weighted_lp: weighted / sup,
        bound: pair.lambda1.powf(p / (p - 1.0)) * mass / sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo {
    pub r_min: f64,
    pub n: usize,
}

impl From<&RadialGrid> for GridInfo {
    fn from(g: &RadialGrid) -> Self {
        Self {
            r_min: g.r_min(),
            n: g.n(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KStarReport {
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub bisection_steps: usize,
    pub grid: GridInfo,
    pub c6: f64,
    pub lambda1: f64,
    pub b_mu: f64,
}

impl KStarReport {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.kappa_lo + self.kappa_hi)
    }
}

pub const BISECTION_BUDGET: usize = 60;

pub fn find_kstar(params: &HardyParams, grid: &Arc<RadialGrid>, rel_tol: f64) -> Result<KStarReport> {
    find_kstar_with(params, grid, rel_tol, &IterationOptions::default())
}

/// Bisection on `κ` with minimal-solution convergence as the predicate.
pub fn find_kstar_with(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    rel_tol: f64,
    opts: &IterationOptions,
) -> Result<KStarReport> {
    if !params.is_subcritical() {
        return Err(HslError::UnsupportedRegime(format!(
            "p={} >= p*={}: only kappa = 0 is admissible",
            params.p(),
            params.p_star()
        )));
    }
    if !(rel_tol > 0.0) {
        return Err(HslError::InvalidParameter("rel_tol must be positive".into()));
    }
    let c6 = barrier_constant_c6(params, grid)?;
    let cert = guaranteed_threshold(params.p(), c6)?;
    let pair = first_eigenpair(params, grid)?;
    let upper = kstar_upper_bound(params, &pair)?;
    let solver = MinimalSolver::new(params, grid)?;
    let converges = |k: f64| -> Result<bool> { Ok(solver.solve(k, opts)?.converged()) };

    let (mut lo, mut hi) = (cert.k_p, upper);
    if !converges(lo)? {
        return Err(HslError::Inconsistency {
            converged: f64::NAN,
            diverged: lo,
        });
    }
    if converges(hi)? {
        return Err(HslError::Inconsistency {
            converged: hi,
            diverged: f64::NAN,
        });
    }
    let mut steps = 0;
    while (hi - lo) / lo >= rel_tol && steps < BISECTION_BUDGET {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(KStarReport {
        kappa_lo: lo,
        kappa_hi: hi,
        lower_bound: cert.k_p,
        upper_bound: upper,
        bisection_steps: steps,
        grid: GridInfo::from(grid.as_ref()),
        c6,
        lambda1: pair.lambda1,
        b_mu: params.b_mu(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Minimal,
    Extremal,
    MountainPass,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Minimal => "minimal",
            Branch::Extremal => "extremal",
            Branch::MountainPass => "mountain_pass",
        }
    }
}

/// One solution on the bifurcation diagram.
#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub kappa: f64,
    pub branch: Branch,
    pub u_at_half: f64,
    /// `None` encodes `σ₁ = +∞`.
    pub sigma1: Option<f64>,
    /// Shifted energy `E(u - u_κ)` relative to the minimal solution.
    pub energy: f64,
    pub kappa_hat: Option<f64>,
    pub lp_dmu_norm: f64,
    #[serde(skip)]
    pub profile: GridFunction,
}

impl BranchPoint {
    /// Assembles a point from a profile, computing `σ₁` and the fitted amplitude.
    pub fn from_profile(
        params: &HardyParams,
        kappa: f64,
        branch: Branch,
        profile: GridFunction,
        energy: f64,
    ) -> Result<Self> {
        let p = params.p();
        let stab = sigma1(params, &profile)?;
        let kappa_hat = fit_singularity(params, &profile).ok().map(|f| f.kappa_hat);
        let lp = integrate_dmu(params, &profile.map(|v| v.max(0.0).powf(p))?)?;
        Ok(Self {
            kappa,
            branch,
            u_at_half: profile.interpolate(0.5)?,
            sigma1: stab.sigma1.is_finite().then_some(stab.sigma1),
            energy,
            kappa_hat,
            lp_dmu_norm: lp,
            profile,
        })
    }

    pub fn from_minimal(params: &HardyParams, rep: IterationReport) -> Result<Self> {
        Self::from_profile(params, rep.kappa, Branch::Minimal, rep.profile, 0.0)
    }
}

/// Minimal solution at the convergent end of the bracket.
pub fn extremal_solution(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    report: &KStarReport,
) -> Result<BranchPoint> {
    extremal_solution_with(params, grid, report, &IterationOptions::default())
}

pub fn extremal_solution_with(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    report: &KStarReport,
    opts: &IterationOptions,
) -> Result<BranchPoint> {
    let rep = MinimalSolver::new(params, grid)?.solve(report.kappa_lo, opts)?;
    if !rep.converged() {
        return Err(HslError::Inconsistency {
            converged: f64::NAN,
            diverged: report.kappa_lo,
        });
    }
    let mut point = BranchPoint::from_minimal(params, rep)?;
    point.branch = Branch::Extremal;
    Ok(point)
}
