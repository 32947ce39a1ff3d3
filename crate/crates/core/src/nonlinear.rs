//! Minimal solutions of `L_μ u = u^p` with singular amplitude `κ` by the
//! monotone iteration `v₀ = S(0, κ)`, `v_n = S(v_{n-1}^p, κ)`, and the
//! explicit barrier `w_t = t κ^p w₁ + κ w₀` that certifies convergence.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HslError, Result};
use crate::grid::{integrate_dmu, GridFunction, RadialGrid, Stencil};
use crate::hardy::HardyParams;
use crate::linear::LinearSolver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    /// Stop when `max_i |v_n - v_{n-1}|_i / (1 + v_n,i) < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Declare divergence when `max_i v_n,i / (1 + Φ_μ(r_i))` exceeds this.
    pub blowup_threshold: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            blowup_threshold: 1e8,
        }
    }
}

impl IterationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(HslError::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(HslError::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.blowup_threshold > 1.0) {
            return Err(HslError::InvalidParameter(format!(
                "blowup_threshold must exceed 1, got {}",
                self.blowup_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationStatus {
    Converged,
    Diverged,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub status: IterationStatus,
    pub iterations: usize,
    pub final_change: f64,
    pub lp_dmu_norm: f64,
    pub kappa: f64,
    /// `κ / b_μ`, the amplitude in the Dirac-mass normalization.
    pub k: f64,
    #[serde(skip)]
    pub profile: GridFunction,
}

impl IterationReport {
    pub fn converged(&self) -> bool {
        self.status == IterationStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierCertificate {
    pub c6: f64,
    pub k_p: f64,
    pub t_p: f64,
    pub valid: bool,
}

fn require_subcritical(params: &HardyParams) -> Result<()> {
    if params.is_subcritical() {
        Ok(())
    } else {
        Err(HslError::UnsupportedRegime(format!(
            "p={} >= p*={}: w0^p is not dmu-integrable",
            params.p(),
            params.p_star()
        )))
    }
}

/// `w₀ = S(0, 1)` and `w₁ = S(w₀^p, 0)`.
pub fn barrier_profiles(params: &HardyParams, grid: &Arc<RadialGrid>) -> Result<(GridFunction, GridFunction)> {
    require_subcritical(params)?;
    let solver = LinearSolver::new(params, grid)?;
    let w0 = solver.solve(&GridFunction::zeros(grid), 1.0)?;
    let p = params.p();
    let w1 = solver.solve(&w0.map(|v| v.max(0.0).powf(p))?, 0.0)?;
    Ok((w0, w1))
}

/// `c₆ = max_i w₁/w₀` over interior nodes.
pub fn barrier_constant_c6(params: &HardyParams, grid: &Arc<RadialGrid>) -> Result<f64> {
    let (w0, w1) = barrier_profiles(params, grid)?;
    Ok(ratio_max(&w0, &w1, grid))
}

/// `c₆` for the amplitude-`κ` normalization `w₀ = S(0, κ)`; equals
/// `κ^{p-1} c₆(1)`.
pub fn barrier_constant_c6_at(params: &HardyParams, grid: &Arc<RadialGrid>, kappa: f64) -> Result<f64> {
    require_subcritical(params)?;
    if !(kappa > 0.0) {
        return Err(HslError::InvalidParameter("kappa must be positive".into()));
    }
    let solver = LinearSolver::new(params, grid)?;
    let w0 = solver.solve(&GridFunction::zeros(grid), kappa)?;
    let p = params.p();
    let w1 = solver.solve(&w0.map(|v| v.max(0.0).powf(p))?, 0.0)?;
    Ok(ratio_max(&w0, &w1, grid))
}

fn ratio_max(w0: &GridFunction, w1: &GridFunction, grid: &RadialGrid) -> f64 {
    grid.interior()
        .map(|i| w1.values()[i] / w0.values()[i])
        .fold(0.0, f64::max)
}

/// `k_p = (1/(c₆p))^{1/(p-1)} (p-1)/p`, `t_p = (p/(p-1))^p`, and the check
/// `(c₆ t_p k_p^{p-1} + 1)^p ≤ t_p`.
pub fn guaranteed_threshold(p: f64, c6: f64) -> Result<BarrierCertificate> {
    if !(p > 1.0) || !(c6 > 0.0 && c6.is_finite()) {
        return Err(HslError::InvalidParameter(format!("need p > 1 and c6 > 0, got p={p}, c6={c6}")));
    }
    let k_p = (1.0 / (c6 * p)).powf(1.0 / (p - 1.0)) * (p - 1.0) / p;
    let t_p = (p / (p - 1.0)).powf(p);
    let f = (c6 * t_p * k_p.powf(p - 1.0) + 1.0).powf(p);
    Ok(BarrierCertificate {
        c6,
        k_p,
        t_p,
        valid: f <= t_p * (1.0 + 1e-12),
    })
}

/// `w_t = t κ^p w₁ + κ w₀`.
pub fn barrier_supersolution(
    w0: &GridFunction,
    w1: &GridFunction,
    kappa: f64,
    t: f64,
    p: f64,
) -> Result<GridFunction> {
    let c = t * kappa.powf(p);
    w1.zip_with(w0, |a, b| c * a + kappa * b)
}

/// Relative roundoff slack applied to the stencil magnitude.
const SUPERSOLUTION_SLACK: f64 = 1e-8;

/// True iff `L u ≥ u^p` at every interior node, up to roundoff in the stencil.
pub fn supersolution_check(params: &HardyParams, u: &GridFunction) -> Result<bool> {
    if u.values().iter().any(|&v| v < 0.0) {
        return Err(HslError::InvalidInput("supersolution check needs u >= 0".into()));
    }
    let st = Stencil::new(params, u.grid());
    let grid = u.grid();
    let h2 = grid.h() * grid.h();
    let v = u.values();
    let p = params.p();
    Ok(grid.interior().all(|i| {
        let r2 = grid.radii()[i].powi(2);
        let lu = st.apply_at(v, i);
        let rhs = v[i].powf(p);
        let scale = ((st.w_hi * (v[i + 1] + v[i]) + st.w_lo * (v[i] + v[i - 1])) / h2 + params.mu().abs() * v[i]) / r2 + rhs;
        lu >= rhs - SUPERSOLUTION_SLACK * scale
    }))
}

/// Prefactored iteration state for repeated runs on one grid.
#[derive(Debug, Clone)]
pub struct MinimalSolver {
    solver: LinearSolver,
    phi: Vec<f64>,
}

impl MinimalSolver {
    pub fn new(params: &HardyParams, grid: &Arc<RadialGrid>) -> Result<Self> {
        require_subcritical(params)?;
        let solver = LinearSolver::new(params, grid)?;
        let phi = grid.radii().iter().map(|&r| params.phi_unchecked(r).abs()).collect();
        Ok(Self { solver, phi })
    }

    pub fn solve(&self, kappa: f64, opts: &IterationOptions) -> Result<IterationReport> {
        self.solve_observed(kappa, opts, |_, _| {})
    }

    /// Runs the iteration, calling `observe(n, v_n)` on every iterate
    /// starting with `v₀`.
    pub fn solve_observed(
        &self,
        kappa: f64,
        opts: &IterationOptions,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<IterationReport> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(HslError::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
        }
        opts.validate()?;
        let params = *self.solver.params();
        let grid = Arc::clone(self.solver.grid());
        let p = params.p();
        let zero = vec![0.0; grid.len()];
        let mut v = self.solver.solve_values(&zero, kappa);
        observe(0, &v);
        let mut status = IterationStatus::MaxIterations;
        let mut change = f64::INFINITY;
        let mut iterations = 0;
        for n in 1..=opts.max_iter {
            let rhs: Vec<f64> = v.iter().map(|&x| x.max(0.0).powf(p)).collect();
            let next = self.solver.solve_values(&rhs, kappa);
            iterations = n;
            if next.iter().any(|x| !x.is_finite())
                || next
                    .iter()
                    .zip(&self.phi)
                    .any(|(&x, &f)| x / (1.0 + f) > opts.blowup_threshold)
            {
                status = IterationStatus::Diverged;
                v = next;
                break;
            }
            change = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
                .fold(0.0, f64::max);
            v = next;
            observe(n, &v);
            if change < opts.tol {
                status = IterationStatus::Converged;
                break;
            }
        }
        if status == IterationStatus::Diverged {
            // keep the profile finite for reporting
            for (x, &f) in v.iter_mut().zip(&self.phi) {
                if !x.is_finite() || *x / (1.0 + f) > opts.blowup_threshold {
                    *x = opts.blowup_threshold * (1.0 + f);
                }
            }
        }
        let profile = GridFunction::new(grid, v)?;
        let lp_dmu_norm = if status == IterationStatus::Converged {
            integrate_dmu(&params, &profile.map(|x| x.max(0.0).powf(p))?)?
        } else {
            f64::INFINITY
        };
        Ok(IterationReport {
            status,
            iterations,
            final_change: change,
            lp_dmu_norm,
            kappa,
            k: kappa / params.b_mu(),
            profile,
        })
    }

    pub fn linear(&self) -> &LinearSolver {
        &self.solver
    }
}

pub fn minimal_solution(
    params: &HardyParams,
    grid: &Arc<RadialGrid>,
    kappa: f64,
    opts: &IterationOptions,
) -> Result<IterationReport> {
    MinimalSolver::new(params, grid)?.solve(kappa, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn lions() -> HardyParams {
        HardyParams::new(3, 0.0, 2.0).unwrap()
    }

    #[test]
    fn threshold_formula_examples() {
        let c = guaranteed_threshold(2.0, 0.25).unwrap();
        assert!((c.k_p - 1.0).abs() < 1e-15);
        assert!((c.t_p - 4.0).abs() < 1e-15);
        assert!(c.valid);
        let c = guaranteed_threshold(3.0, 1.0).unwrap();
        assert!((c.t_p - 3.375).abs() < 1e-14);
        assert!((c.k_p - (1.0f64 / 3.0).sqrt() * 2.0 / 3.0).abs() < 1e-14);
        assert!(c.valid);
        assert!(guaranteed_threshold(1.0, 1.0).is_err());
        assert!(guaranteed_threshold(2.0, 0.0).is_err());
    }

    #[test]
    fn zero_amplitude_is_immediate_fixed_point() {
        let g = build_grid(1e-4, 128).unwrap();
        let rep = minimal_solution(&lions(), &g, 0.0, &IterationOptions::default()).unwrap();
        assert_eq!(rep.status, IterationStatus::Converged);
        assert_eq!(rep.iterations, 1);
        assert!(rep.profile.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_negative_kappa_and_supercritical() {
        let g = build_grid(1e-4, 64).unwrap();
        assert!(matches!(
            minimal_solution(&lions(), &g, -1.0, &IterationOptions::default()),
            Err(HslError::InvalidParameter(_))
        ));
        let sup = HardyParams::new(3, 0.0, 3.0).unwrap();
        assert!(matches!(barrier_constant_c6(&sup, &g), Err(HslError::UnsupportedRegime(_))));
    }

    #[test]
    fn c6_scaling_law() {
        let p = lions();
        let g = build_grid(1e-5, 512).unwrap();
        let c1 = barrier_constant_c6_at(&p, &g, 1.0).unwrap();
        let c2 = barrier_constant_c6_at(&p, &g, 2.0).unwrap();
        // w₁/w₀ at amplitude 2 is 2^{p-1} times that at amplitude 1
        assert!((c2 / c1 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ratio_vanishes_near_the_origin() {
        let p = lions();
        let g = build_grid(1e-6, 512).unwrap();
        let (w0, w1) = barrier_profiles(&p, &g).unwrap();
        let inner = w1.values()[2] / w0.values()[2];
        let c6 = barrier_constant_c6(&p, &g).unwrap();
        assert!(inner < 1e-3 * c6);
    }

    #[test]
    fn barrier_is_supersolution_and_doubling_is_not() {
        let p = lions();
        let g = build_grid(1e-5, 512).unwrap();
        let (w0, w1) = barrier_profiles(&p, &g).unwrap();
        let cert = guaranteed_threshold(p.p(), ratio_max(&w0, &w1, &g)).unwrap();
        let w = barrier_supersolution(&w0, &w1, cert.k_p, cert.t_p, p.p()).unwrap();
        assert!(supersolution_check(&p, &w).unwrap());
        assert!(supersolution_check(&p, &GridFunction::zeros(&g)).unwrap());

        let rep = minimal_solution(&p, &g, cert.k_p, &IterationOptions::default()).unwrap();
        assert!(rep.converged());
        let doubled = rep.profile.scaled(2.0);
        assert!(!supersolution_check(&p, &doubled).unwrap());
    }

    #[test]
    fn iterates_increase_and_stay_below_barrier() {
        for (mu, pw) in [(0.0, 2.0), (2.0, 1.5), (-0.25, 2.0)] {
            let p = HardyParams::new(3, mu, pw).unwrap();
            let g = build_grid(1e-5, 400).unwrap();
            let (w0, w1) = barrier_profiles(&p, &g).unwrap();
            let cert = guaranteed_threshold(pw, ratio_max(&w0, &w1, &g)).unwrap();
            let kappa = cert.k_p;
            let w = barrier_supersolution(&w0, &w1, kappa, cert.t_p, pw).unwrap();
            let mut prev: Option<Vec<f64>> = None;
            let mut ok = true;
            let rep = MinimalSolver::new(&p, &g)
                .unwrap()
                .solve_observed(kappa, &IterationOptions::default(), |_, v| {
                    if let Some(q) = &prev {
                        ok &= v.iter().zip(q).all(|(a, b)| a >= b);
                    }
                    ok &= v.iter().zip(w.values()).all(|(a, b)| *a <= b * (1.0 + 1e-12));
                    prev = Some(v.to_vec());
                })
                .unwrap();
            assert!(rep.converged(), "mu={mu}");
            assert!(ok, "mu={mu}");
        }
    }

    #[test]
    fn large_amplitude_diverges() {
        let g = build_grid(1e-4, 256).unwrap();
        let rep = minimal_solution(&lions(), &g, 50.0, &IterationOptions::default()).unwrap();
        assert_eq!(rep.status, IterationStatus::Diverged);
        assert!(rep.profile.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn monotone_in_kappa() {
        let p = lions();
        let g = build_grid(1e-5, 300).unwrap();
        let s = MinimalSolver::new(&p, &g).unwrap();
        let a = s.solve(0.3, &IterationOptions::default()).unwrap();
        let b = s.solve(0.6, &IterationOptions::default()).unwrap();
        assert!(a.converged() && b.converged());
        assert!(a.profile.values().iter().zip(b.profile.values()).all(|(x, y)| x <= y));
    }
}
