//! Shifted energy `E(v) = ½‖v‖²_μ − ∫F(u_κ, v₊) dx` around a minimal
//! solution `u_κ`, its gradient, and a path-deformation mountain-pass search
//! for a positive critical point `v`, so that `u_κ + v` is a second solution.
//!
//! All work happens on interior nodes in the variable `Y = r^{(N-2)/2} v`,
//! where the quadratic part is `½|S| h YᵀTY` with the symmetric stencil
//! matrix `T` and the potential part is a trapezoid sum against `r^N dt`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HslError, Result};
use crate::extremal::first_eigenpair;
use crate::grid::{GridFunction, RadialGrid};
use crate::hardy::HardyParams;
use crate::linear::LinearSolver;
use crate::stability::sigma1;
use crate::tridiag::Tridiagonal;

/// Below this `|t/s|` the primitive is summed as a binomial series.
const SERIES_SWITCH: f64 = 1e-3;

fn binomial_tail(p: f64, x: f64, first: usize) -> f64 {
    // Σ_{k ≥ first} C(p+1, k) x^k
    let e = p + 1.0;
    let mut coeff = 1.0;
    for k in 0..first {
        coeff *= (e - k as f64) / (k as f64 + 1.0);
    }
    let mut term = coeff * x.powi(first as i32);
    let mut sum = term;
    for k in first..first + 12 {
        term *= (e - k as f64) / (k as f64 + 1.0) * x;
        sum += term;
    }
    sum
}

/// `F(s,t) = [(s+t₊)^{p+1} − s^{p+1} − (p+1)s^p t₊]/(p+1)`, evaluated without
/// cancellation when `t₊ ≪ s`.
pub fn nonlinear_primitive_f(p: f64, s: f64, t: f64) -> f64 {
    let t = t.max(0.0);
    if t == 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return t.powf(p + 1.0) / (p + 1.0);
    }
    let x = t / s;
    let g = if x < SERIES_SWITCH {
        binomial_tail(p, x, 2)
    } else {
        ((p + 1.0) * x.ln_1p()).exp_m1() - (p + 1.0) * x
    };
    s.powf(p + 1.0) * g / (p + 1.0)
}

/// `∂F/∂t = (s+t₊)^p − s^p`.
pub fn nonlinear_source(p: f64, s: f64, t: f64) -> f64 {
    let t = t.max(0.0);
    if t == 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return t.powf(p);
    }
    s.powf(p) * (p * (t / s).ln_1p()).exp_m1()
}

struct Model {
    p: f64,
    solver: LinearSolver,
    t: Tridiagonal,
    u: Vec<f64>,
    ys: Vec<f64>,
    rhs_scale: Vec<f64>,
    r2: Vec<f64>,
    /// `|S| h r_i^N`
    wq: Vec<f64>,
    area_h: f64,
}

impl Model {
    fn new(params: &HardyParams, u_k: &GridFunction) -> Result<Self> {
        if u_k.values().iter().any(|&v| v < 0.0) {
            return Err(HslError::InvalidInput("u_k must be nonnegative".into()));
        }
        let grid = u_k.grid();
        let solver = LinearSolver::new(params, grid)?;
        let st = solver.stencil();
        let area_h = params.constants().sphere_area * grid.h();
        let dim = params.dim() as i32;
        let idx = grid.interior();
        Ok(Self {
            p: params.p(),
            t: st.matrix(),
            u: idx.clone().map(|i| u_k.values()[i]).collect(),
            ys: idx.clone().map(|i| st.y_scale[i]).collect(),
            rhs_scale: idx.clone().map(|i| st.rhs_scale(i)).collect(),
            r2: idx.clone().map(|i| grid.radii()[i].powi(2)).collect(),
            wq: idx.map(|i| area_h * grid.radii()[i].powi(dim)).collect(),
            area_h,
            solver,
        })
    }

    fn grid(&self) -> &Arc<RadialGrid> {
        self.solver.grid()
    }

    fn to_y(&self, v: &GridFunction) -> Result<Vec<f64>> {
        let vals = v.values();
        let last = vals.len() - 1;
        if vals[0] != 0.0 || vals[last] != 0.0 {
            return Err(HslError::InvalidInput("v must vanish at both cutoff ends".into()));
        }
        Ok(self.grid().interior().zip(&self.ys).map(|(i, s)| vals[i] * s).collect())
    }

    fn to_v(&self, y: &[f64]) -> GridFunction {
        let mut vals = vec![0.0; y.len() + 2];
        for (k, (a, s)) in y.iter().zip(&self.ys).enumerate() {
            vals[k + 1] = a / s;
        }
        GridFunction::new(Arc::clone(self.grid()), vals).expect("finite path point")
    }

    fn quad(&self, y: &[f64]) -> f64 {
        let ty = self.t.mul(y);
        self.area_h * y.iter().zip(&ty).map(|(a, b)| a * b).sum::<f64>()
    }

    fn norm(&self, y: &[f64]) -> f64 {
        self.quad(y).max(0.0).sqrt()
    }

    fn energy(&self, y: &[f64]) -> f64 {
        let pot: f64 = (0..y.len())
            .map(|k| self.wq[k] * nonlinear_primitive_f(self.p, self.u[k], y[k] / self.ys[k]))
            .sum();
        0.5 * self.quad(y) - pot
    }

    fn forcing(&self, y: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|k| self.rhs_scale[k] * nonlinear_source(self.p, self.u[k], y[k] / self.ys[k]))
            .collect()
    }

    /// Gradient with respect to the `‖·‖_μ` inner product: `Y − T⁻¹ g(Y)`.
    fn sobolev(&self, y: &[f64]) -> Vec<f64> {
        let z = self.solver.solve_y(&self.forcing(y));
        y.iter().zip(&z).map(|(a, b)| a - b).collect()
    }

    fn picard(&self, y: &[f64]) -> Vec<f64> {
        self.solver.solve_y(&self.forcing(y))
    }

    fn newton_step(&self, y: &[f64]) -> Result<Vec<f64>> {
        let ty = self.t.mul(y);
        let g = self.forcing(y);
        let res: Vec<f64> = ty.iter().zip(&g).map(|(a, b)| a - b).collect();
        let jac = Tridiagonal {
            lower: self.t.lower.clone(),
            upper: self.t.upper.clone(),
            diag: (0..y.len())
                .map(|k| {
                    let v = y[k] / self.ys[k];
                    let d = if v > 0.0 {
                        self.p * self.r2[k] * (self.u[k] + v).powf(self.p - 1.0)
                    } else {
                        0.0
                    };
                    self.t.diag[k] - d
                })
                .collect(),
        };
        let delta = jac.solve(&res)?;
        Ok(y.iter().zip(&delta).map(|(a, b)| a - b).collect())
    }
}

fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

/// Discrete `E(v)`; `v` must vanish at both cutoff ends.
pub fn energy(params: &HardyParams, u_k: &GridFunction, v: &GridFunction) -> Result<f64> {
    let m = Model::new(params, u_k)?;
    Ok(m.energy(&m.to_y(v)?))
}

/// Strong-form residual `L_μ v − [(u_κ + v₊)^p − u_κ^p]` at interior nodes.
pub fn energy_gradient(params: &HardyParams, u_k: &GridFunction, v: &GridFunction) -> Result<GridFunction> {
    let m = Model::new(params, u_k)?;
    let y = m.to_y(v)?;
    let ty = m.t.mul(&y);
    let mut out = vec![0.0; y.len() + 2];
    for k in 0..y.len() {
        out[k + 1] = ty[k] / m.rhs_scale[k] - nonlinear_source(m.p, m.u[k], y[k] / m.ys[k]);
    }
    GridFunction::new(Arc::clone(m.grid()), out)
}

/// `∫ g w dx` over the interior nodes, the pairing under which
/// [`energy_gradient`] is the derivative of [`energy`].
pub fn gradient_pairing(params: &HardyParams, g: &GridFunction, w: &GridFunction) -> Result<f64> {
    let grid = g.grid();
    let area_h = params.constants().sphere_area * grid.h();
    let dim = params.dim() as i32;
    let gw = g.zip_with(w, |a, b| a * b)?;
    Ok(grid
        .interior()
        .map(|i| area_h * grid.radii()[i].powi(dim) * gw.values()[i])
        .sum())
}

/// `‖v‖_μ` of a profile vanishing at both cutoff ends.
pub fn mu_norm(params: &HardyParams, v: &GridFunction) -> Result<f64> {
    let m = Model::new(params, &GridFunction::zeros(v.grid()))?;
    Ok(m.norm(&m.to_y(v)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyState {
    #[serde(skip)]
    pub v: GridFunction,
    pub energy: f64,
    /// `‖·‖_μ`-dual norm of the gradient.
    pub grad_norm: f64,
}

pub fn energy_state(params: &HardyParams, u_k: &GridFunction, v: &GridFunction) -> Result<EnergyState> {
    let m = Model::new(params, u_k)?;
    let y = m.to_y(v)?;
    Ok(EnergyState {
        v: v.clone(),
        energy: m.energy(&y),
        grad_norm: m.norm(&m.sobolev(&y)),
    })
}

#[derive(Debug, Clone)]
pub struct PathState {
    pub points: Vec<GridFunction>,
    pub max_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub path_index: usize,
    pub energy: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "path_index", "energy"])?;
    for r in rows {
        w.write_record([r.step.to_string(), r.path_index.to_string(), format!("{:.16e}", r.energy)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainPassOptions {
    /// Converged when `grad_norm ≤ tol · max(1, ‖v‖_μ)`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub path_points: usize,
    pub sigma0: f64,
    pub reparam_every: usize,
    /// Relative gradient below which Newton polishing is attempted.
    pub newton_switch: f64,
    pub max_newton: usize,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 20_000,
            path_points: 41,
            sigma0: 0.1,
            reparam_every: 50,
            newton_switch: 1e-3,
            max_newton: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassOutcome {
    pub state: EnergyState,
    pub beta: f64,
    pub sweeps: usize,
    pub newton_steps: usize,
    /// Refined path maximum after every sweep.
    pub levels: Vec<f64>,
    /// Sweeps at which the path was re-parameterized.
    pub reparam_sweeps: Vec<usize>,
    pub path: PathState,
    pub trace: Vec<TraceRow>,
}

fn golden_max(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-7 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (f0, f1) = (f(0.0), f(1.0));
    let (s, v) = if fc > fd { (c, fc) } else { (d, fd) };
    [(0.0, f0), (1.0, f1), (s, v)]
        .into_iter()
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Smooth positive trial directions vanishing at both cutoff ends.
fn sphere_samples(params: &HardyParams, u_k: &GridFunction) -> Result<Vec<GridFunction>> {
    let grid = u_k.grid();
    let mut out = vec![first_eigenpair(params, grid)?.phi1];
    let stab = sigma1(params, u_k)?;
    if stab.sigma1.is_finite() {
        out.push(stab.eigenfunction);
    }
    let t_min = grid.r_min().ln();
    for c in [-0.3, -1.0, -2.5, -5.0] {
        if c <= t_min {
            continue;
        }
        let mut vals: Vec<f64> = grid
            .log_radii()
            .iter()
            .map(|&t| (-(t - c).powi(2) / 0.5).exp() * (1.0 - t.exp()))
            .collect();
        let last = vals.len() - 1;
        vals[0] = 0.0;
        vals[last] = 0.0;
        out.push(GridFunction::new(Arc::clone(grid), vals)?);
    }
    Ok(out)
}

/// Half the least energy of the sampled directions on the sphere `‖v‖_μ = σ₀`.
pub fn beta_estimate(params: &HardyParams, u_k: &GridFunction, sigma0: f64) -> Result<f64> {
    let m = Model::new(params, u_k)?;
    let mut least = f64::INFINITY;
    for w in sphere_samples(params, u_k)? {
        let y = m.to_y(&w)?;
        let n = m.norm(&y);
        if n > 0.0 {
            let y: Vec<f64> = y.iter().map(|a| a * sigma0 / n).collect();
            least = least.min(m.energy(&y));
        }
    }
    Ok(0.5 * least)
}

fn reparameterize(m: &Model, path: &mut [Vec<f64>]) {
    let k = path.len();
    let mut arc = vec![0.0; k];
    for j in 1..k {
        let d: Vec<f64> = path[j].iter().zip(&path[j - 1]).map(|(a, b)| a - b).collect();
        arc[j] = arc[j - 1] + m.norm(&d);
    }
    let total = arc[k - 1];
    if !(total > 0.0) {
        return;
    }
    let old = path.to_vec();
    let mut seg = 0;
    for (j, slot) in path.iter_mut().enumerate().take(k - 1).skip(1) {
        let target = total * j as f64 / (k - 1) as f64;
        while seg + 1 < k - 1 && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let s = if len > 0.0 { (target - arc[seg]) / len } else { 0.0 };
        *slot = lerp(&old[seg], &old[seg + 1], s.clamp(0.0, 1.0));
    }
}

/// Path-deformation search for a positive critical point of `E` at a level
/// at least `β`.
pub fn mountain_pass_solve(
    params: &HardyParams,
    u_k: &GridFunction,
    opts: &MountainPassOptions,
) -> Result<MountainPassOutcome> {
    if !params.is_subcritical() {
        return Err(HslError::UnsupportedRegime("mountain pass needs p < p*".into()));
    }
    if opts.path_points < 3 {
        return Err(HslError::InvalidParameter("path needs at least 3 points".into()));
    }
    let m = Model::new(params, u_k)?;
    let beta = beta_estimate(params, u_k, opts.sigma0)?;
    if !(beta > 0.0) {
        return Err(HslError::NoSecondSolution {
            level: 2.0 * beta,
            beta,
        });
    }

    // endpoint e = t₀φ₁ with E(e) ≤ 0
    let phi = m.to_y(&first_eigenpair(params, m.grid())?.phi1)?;
    let mut t0 = 1.0;
    let mut e = phi.clone();
    for _ in 0..80 {
        e = phi.iter().map(|a| a * t0).collect();
        if m.energy(&e) <= 0.0 {
            break;
        }
        t0 *= 2.0;
    }
    if m.energy(&e) > 0.0 {
        return Err(HslError::Numeric("no endpoint with nonpositive energy".into()));
    }
    let npts = opts.path_points;
    let mut path: Vec<Vec<f64>> = (0..npts)
        .map(|j| e.iter().map(|a| a * j as f64 / (npts - 1) as f64).collect())
        .collect();
    let mut energies: Vec<f64> = path.iter().map(|y| m.energy(y)).collect();

    let mut trace = Vec::new();
    let record = |trace: &mut Vec<TraceRow>, step: usize, energies: &[f64]| {
        trace.extend(energies.iter().enumerate().map(|(j, &en)| TraceRow {
            step,
            path_index: j,
            energy: en,
        }));
    };
    record(&mut trace, 0, &energies);

    let mut levels = Vec::new();
    let mut reparam_sweeps = Vec::new();
    let mut newton_steps = 0;
    let mut sweeps = 0;
    let mut found: Option<Vec<f64>> = None;
    let mut newton_failed_at = f64::INFINITY;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mi = (1..npts - 1).fold(1, |a, j| if energies[j] > energies[a] { j } else { a });
        // refine along the two adjacent segments
        let (sl, el) = golden_max(|s| m.energy(&lerp(&path[mi - 1], &path[mi], s)));
        let (sr, er) = golden_max(|s| m.energy(&lerp(&path[mi], &path[mi + 1], s)));
        if el >= er && el > energies[mi] {
            path[mi] = lerp(&path[mi - 1], &path[mi], sl);
            energies[mi] = el;
        } else if er > el && er > energies[mi] {
            path[mi] = lerp(&path[mi], &path[mi + 1], sr);
            energies[mi] = er;
        }
        let z = path[mi].clone();
        let level = energies[mi];
        levels.push(level);

        let d = m.sobolev(&z);
        let gn = m.norm(&d);
        let zn = m.norm(&z);
        if gn <= opts.tol * zn.max(1.0) {
            found = Some(z);
            break;
        }
        if gn <= opts.newton_switch * zn && gn < 0.5 * newton_failed_at {
            if let Some((y, steps)) = polish(&m, &z, opts) {
                newton_steps += steps;
                found = Some(y);
                break;
            }
            newton_failed_at = gn;
        }

        let mut s = 1.0;
        let mut moved = false;
        while s >= 1e-12 {
            let trial = axpy(&z, -s, &d);
            let et = m.energy(&trial);
            if et < level {
                let (_, a) = golden_max(|x| m.energy(&lerp(&path[mi - 1], &trial, x)));
                let (_, b) = golden_max(|x| m.energy(&lerp(&trial, &path[mi + 1], x)));
                if a.max(b) < level {
                    path[mi] = trial;
                    energies[mi] = et;
                    moved = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !moved {
            // descent stalled at roundoff; Newton is the only way forward
            if let Some((y, steps)) = polish(&m, &z, opts) {
                newton_steps += steps;
                found = Some(y);
            }
            break;
        }
        if opts.reparam_every > 0 && sweeps % opts.reparam_every == 0 {
            reparameterize(&m, &mut path);
            energies = path.iter().map(|y| m.energy(y)).collect();
            reparam_sweeps.push(sweeps);
            record(&mut trace, sweeps, &energies);
        }
    }

    let max_index = (1..npts - 1).fold(1, |a, j| if energies[j] > energies[a] { j } else { a });
    record(&mut trace, sweeps, &energies);
    let path_state = PathState {
        points: path.iter().map(|y| m.to_v(y)).collect(),
        max_index,
    };
    let last_level = levels.last().copied().unwrap_or(f64::NAN);
    let Some(y) = found else {
        return Err(HslError::NoSecondSolution {
            level: last_level,
            beta,
        });
    };
    // one Picard sweep makes v = S(f(u, v₊)) ≥ 0 exactly
    let y = m.picard(&y);
    let v = m.to_v(&y);
    let level = m.energy(&y);
    let grad_norm = m.norm(&m.sobolev(&y));
    if m.norm(&y) < opts.sigma0 || !(level >= beta) {
        return Err(HslError::NoSecondSolution { level, beta });
    }
    Ok(MountainPassOutcome {
        state: EnergyState {
            v,
            energy: level,
            grad_norm,
        },
        beta,
        sweeps,
        newton_steps,
        levels,
        reparam_sweeps,
        path: path_state,
        trace,
    })
}

/// Newton iteration from a near-critical path point. Accepts only a
/// positive critical point close to the start.
fn polish(m: &Model, start: &[f64], opts: &MountainPassOptions) -> Option<(Vec<f64>, usize)> {
    let start_norm = m.norm(start);
    let mut y = start.to_vec();
    for step in 1..=opts.max_newton {
        y = m.newton_step(&y).ok()?;
        if y.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let yn = m.norm(&y);
        let gn = m.norm(&m.sobolev(&y));
        if gn <= opts.tol * yn.max(1.0) {
            let d: Vec<f64> = y.iter().zip(start).map(|(a, b)| a - b).collect();
            let positive = y.iter().all(|&v| v > -1e-12 * yn);
            return (positive && m.norm(&d) < 0.25 * start_norm).then_some((y, step));
        }
    }
    None
}
