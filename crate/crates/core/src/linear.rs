//! The singular linear problem `L_μ u = f` in `B₁∖{0}`, `u(1) = 0`,
//! `lim u Φ_μ⁻¹ = κ`, closed at the inner cutoff by `u(r_min) = κ Φ_μ(r_min)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{HslError, Result};
use crate::grid::{integrate_dmu, GridFunction, RadialGrid, Stencil};
use crate::hardy::HardyParams;
use crate::tridiag::ThomasLu;

#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub params: HardyParams,
    pub f: GridFunction,
    pub kappa: f64,
}

impl LinearProblem {
    pub fn new(params: HardyParams, f: GridFunction, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(HslError::InvalidParameter("kappa must be finite".into()));
        }
        Ok(Self { params, f, kappa })
    }
}

/// Prefactored solver for repeated solves on one `(params, grid)` pair.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    stencil: Stencil,
    lu: ThomasLu,
}

impl LinearSolver {
    pub fn new(params: &HardyParams, grid: &Arc<RadialGrid>) -> Result<Self> {
        let stencil = Stencil::new(params, grid);
        let lu = stencil.matrix().factor().map_err(|e| {
            HslError::Internal(format!("discrete Hardy operator not invertible: {e}"))
        })?;
        if !lu.all_pivots_positive() {
            return Err(HslError::Internal("discrete Hardy operator not positive".into()));
        }
        Ok(Self { stencil, lu })
    }

    pub fn params(&self) -> &HardyParams {
        &self.stencil.params
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.stencil.grid
    }

    /// Solves with right-hand side given as raw node values (boundary
    /// entries of `f` are ignored).
    pub fn solve_values(&self, f: &[f64], kappa: f64) -> Vec<f64> {
        let grid = &self.stencil.grid;
        let n = grid.n();
        let h2 = grid.h() * grid.h();
        let inner = kappa * self.stencil.params.phi_unchecked(grid.r_min());
        let y0 = self.stencil.y_scale[0] * inner;
        let mut rhs: Vec<f64> = (1..=n).map(|i| self.stencil.rhs_scale(i) * f[i]).collect();
        rhs[0] += y0 / h2;
        let y = self.lu.solve(&rhs);
        let mut u = Vec::with_capacity(n + 2);
        u.push(inner);
        u.extend((1..=n).map(|i| y[i - 1] / self.stencil.y_scale[i]));
        u.push(0.0);
        u
    }

    pub fn solve(&self, f: &GridFunction, kappa: f64) -> Result<GridFunction> {
        GridFunction::new(Arc::clone(self.grid()), self.solve_values(f.values(), kappa))
    }

    /// `Y`-space solve with homogeneous boundary data: `T Y = rhs`.
    pub(crate) fn solve_y(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve(rhs)
    }

    pub(crate) fn stencil(&self) -> &Stencil {
        &self.stencil
    }
}

pub fn solve_linear(prob: &LinearProblem) -> Result<GridFunction> {
    LinearSolver::new(&prob.params, prob.f.grid())?.solve(&prob.f, prob.kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierRegime {
    /// `τ₋ < τ < τ₊`: `u ≤ c₃ r^τ`
    BelowTauPlus,
    /// `τ = τ₊`: `u ≤ c₄ r^τ (1 + (-ln r)₊)`
    AtTauPlus,
    /// `τ > τ₊`: `u ≤ c₅ r^{τ₊}`
    AboveTauPlus,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub regime: BarrierRegime,
    pub constant: f64,
    pub tau: f64,
    pub c2: f64,
}

const REGIME_TOL: f64 = 1e-12;

/// Solves `L_μ u = f` with zero amplitude and returns the smallest constant
/// realizing the barrier bound of the regime selected by `τ` vs `τ₊`.
pub fn check_barrier_bounds(
    params: &HardyParams,
    f: &GridFunction,
    tau: f64,
    c2: f64,
) -> Result<BoundReport> {
    if params.is_critical() {
        return Err(HslError::InvalidParameter("barrier bounds need mu > mu0".into()));
    }
    if tau <= params.tau_minus() {
        return Err(HslError::InvalidParameter(format!(
            "tau={tau} must exceed tau_minus={}",
            params.tau_minus()
        )));
    }
    let grid = f.grid();
    for (i, (&r, &v)) in grid.radii().iter().zip(f.values()).enumerate() {
        let env = c2 * r.powf(tau - 2.0);
        if v < 0.0 || v > env * (1.0 + 1e-12) {
            return Err(HslError::InvalidInput(format!(
                "f violates 0 <= f <= c2 r^(tau-2) at node {i} (r={r})"
            )));
        }
    }
    let u = LinearSolver::new(params, grid)?.solve(f, 0.0)?;
    let tp = params.tau_plus();
    let regime = if (tau - tp).abs() <= REGIME_TOL {
        BarrierRegime::AtTauPlus
    } else if tau < tp {
        BarrierRegime::BelowTauPlus
    } else {
        BarrierRegime::AboveTauPlus
    };
    let envelope = |r: f64| match regime {
        BarrierRegime::BelowTauPlus => r.powf(tau),
        BarrierRegime::AtTauPlus => r.powf(tau) * (1.0 + (-r.ln()).max(0.0)),
        BarrierRegime::AboveTauPlus => r.powf(tp),
    };
    let len = grid.len();
    let constant = (2..len - 2)
        .map(|i| u.values()[i] / envelope(grid.radii()[i]))
        .fold(0.0, f64::max);
    if !constant.is_finite() {
        return Err(HslError::Numeric("barrier constant not finite".into()));
    }
    Ok(BoundReport {
        regime,
        constant,
        tau,
        c2,
    })
}

/// A radial integrand `r^a |ln r|^logpow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLog {
    pub a: f64,
    pub logpow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanVerdict {
    Integrable,
    Divergent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub r_min: Vec<f64>,
    pub integrals: Vec<f64>,
    pub verdict: ScanVerdict,
}

/// Ratio of successive increments below which the truncated integrals are
/// treated as a geometric Cauchy sequence.
const GEOMETRIC_DECAY: f64 = 0.75;

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    (
        [
            -0.960_289_856_497_536_2,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_649_8,
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_2,
        ],
        [
            0.101_228_536_290_376_3,
            0.222_381_034_453_374_5,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ],
    )
}

/// `∫_{t0}^{t1} f(e^t)|S| e^{t(N+τ₊)} dt` by composite 8-point Gauss-Legendre.
fn integrate_segment(params: &HardyParams, f: PowerLog, t0: f64, t1: f64) -> f64 {
    let (x, w) = gauss_legendre_8();
    let panels = (((t1 - t0) / 0.02).ceil() as usize).max(1);
    let width = (t1 - t0) / panels as f64;
    let expo = f.a + f64::from(params.dim()) + params.tau_plus();
    let mut s = 0.0;
    for k in 0..panels {
        let mid = t0 + (k as f64 + 0.5) * width;
        for j in 0..8 {
            let t = mid + 0.5 * width * x[j];
            s += w[j] * (expo * t).exp() * t.abs().powf(f.logpow);
        }
    }
    s * 0.5 * width * params.constants().sphere_area
}

/// Truncated integrals `∫_{r_min}^1 f dμ` along a decreasing cutoff
/// sequence, with a Cauchy verdict on the increments.
pub fn integrability_scan(
    params: &HardyParams,
    f: PowerLog,
    r_min_sequence: &[f64],
) -> Result<ScanReport> {
    if r_min_sequence.len() < 3 {
        return Err(HslError::InvalidParameter("need at least three cutoffs".into()));
    }
    if r_min_sequence.windows(2).any(|w| !(w[1] < w[0])) || r_min_sequence.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(HslError::InvalidParameter(
            "cutoffs must be strictly decreasing in (0, 1)".into(),
        ));
    }
    let mut integrals = Vec::with_capacity(r_min_sequence.len());
    let mut acc = integrate_segment(params, f, r_min_sequence[0].ln(), 0.0);
    integrals.push(acc);
    for w in r_min_sequence.windows(2) {
        acc += integrate_segment(params, f, w[1].ln(), w[0].ln());
        integrals.push(acc);
    }
    let incr: Vec<f64> = integrals.windows(2).map(|w| w[1] - w[0]).collect();
    let decaying = incr
        .windows(2)
        .rev()
        .take(2)
        .all(|w| w[0].abs() > 0.0 && w[1].abs() <= GEOMETRIC_DECAY * w[0].abs())
        || incr.last().is_some_and(|&d| d == 0.0);
    let verdict = if decaying && acc.is_finite() {
        ScanVerdict::Integrable
    } else {
        ScanVerdict::Divergent
    };
    Ok(ScanReport {
        r_min: r_min_sequence.to_vec(),
        integrals,
        verdict,
    })
}

/// `∫ u^p dμ` of a nonnegative profile.
pub fn lp_dmu(params: &HardyParams, u: &GridFunction) -> Result<f64> {
    let p = params.p();
    integrate_dmu(params, &u.map(|v| v.max(0.0).powf(p))?)
}
