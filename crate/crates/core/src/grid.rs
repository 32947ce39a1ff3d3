//! Logarithmic radial mesh, the discrete radial forms of `L_μ` and `L*_μ`,
//! and trapezoid quadrature against `dμ` and `dx`.
//!
//! Nodes are uniform in `t = ln r` on `[ln r_min, 0]`. In that variable
//! `r²L_μ` has constant coefficients, and with `Y = r^{(N-2)/2} u` it becomes
//! the Schrödinger-type operator `-Y'' + (μ - μ₀)Y`. The stencil used here is
//! the conservative one,
//!
//! ```text
//! (L u)_i = r_i^{-2} [ (-e^{ah/2}(u_{i+1}-u_i) + e^{-ah/2}(u_i-u_{i-1})) / h² + μ u_i ],   a = N-2,
//! ```
//!
//! which is second order, symmetric in `Y`, and a Stieltjes matrix for every
//! `μ ≥ μ₀`.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{HslError, Result};
use crate::hardy::HardyParams;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_min: f64,
    n: usize,
    h: f64,
    t: Vec<f64>,
    r: Vec<f64>,
}

/// Builds the grid `r_i = r_min e^{ih}`, `i = 0..=n+1`, with `r_{n+1} = 1`.
pub fn build_grid(r_min: f64, n: usize) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(r_min, n).map(Arc::new)
}

impl RadialGrid {
    pub const MIN_INTERIOR: usize = 16;

    pub fn new(r_min: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(HslError::InvalidParameter(format!(
                "r_min must lie in (0, 1), got {r_min}"
            )));
        }
        if n < Self::MIN_INTERIOR {
            return Err(HslError::InvalidParameter(format!(
                "need at least {} interior nodes, got {n}",
                Self::MIN_INTERIOR
            )));
        }
        let span = -r_min.ln();
        let h = span / (n as f64 + 1.0);
        let t: Vec<f64> = (0..n + 2)
            .map(|i| if i == n + 1 { 0.0 } else { -span + i as f64 * h })
            .collect();
        let mut r: Vec<f64> = t.iter().map(|&s| s.exp()).collect();
        r[0] = r_min;
        r[n + 1] = 1.0;
        Ok(Self { r_min, n, h, t, r })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Number of interior nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total node count `n + 2`.
    pub fn len(&self) -> usize {
        self.n + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing in `s = ln(1/r)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    /// `ln r_i`.
    pub fn log_radii(&self) -> &[f64] {
        &self.t
    }

    /// Trapezoid weights in `t` (including the endpoints).
    pub(crate) fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n + 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Index range of the interior nodes.
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.n + 1
    }
}

/// A radial profile sampled on every node of a grid (boundary nodes included).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HslError::InvalidInput(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HslError::Numeric(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.radii().iter().map(|&r| f(r)).collect();
        Self::new(Arc::clone(grid), values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(HslError::InvalidInput("grid functions live on different grids".into()));
        }
        Self::new(
            Arc::clone(&self.grid),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Quadratic interpolation in `ln r` through the three nearest nodes.
    pub fn interpolate(&self, r: f64) -> Result<f64> {
        let g = &self.grid;
        if !(r >= g.r_min && r <= 1.0) {
            return Err(HslError::Domain(format!("radius {r} outside [{}, 1]", g.r_min)));
        }
        let s = (r.ln() - g.t[0]) / g.h;
        let centre = (s.round() as usize).clamp(1, g.n);
        let x = s - centre as f64;
        let (a, b, c) = (
            self.values[centre - 1],
            self.values[centre],
            self.values[centre + 1],
        );
        Ok(b + 0.5 * x * (c - a) + 0.5 * x * x * (c - 2.0 * b + a))
    }

    /// Writes the profile as CSV with header `r,value`, radii ascending,
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "value"])?;
        for (r, v) in self.grid.radii().iter().zip(&self.values) {
            w.write_record([format!("{r:.16e}"), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a profile written by [`GridFunction::write_csv`] back onto `grid`.
    pub fn read_csv<R: Read>(grid: &Arc<RadialGrid>, reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| HslError::InvalidInput(format!("bad CSV row {i}")))
            };
            let r = parse(0)?;
            if i >= grid.len() || (r - grid.r[i]).abs() > 1e-12 * grid.r[i].max(1e-300) {
                return Err(HslError::InvalidInput(format!("row {i}: radius {r} off grid")));
            }
            values.push(parse(1)?);
        }
        Self::new(Arc::clone(grid), values)
    }
}

/// Conservative discrete form of `L_μ` on a given grid, in the
/// `Y = r^{(N-2)/2} u` variable where it is symmetric with constant
/// coefficients.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub grid: Arc<RadialGrid>,
    pub params: HardyParams,
    /// `e^{-ah/2}`, `e^{ah/2}`
    pub w_lo: f64,
    pub w_hi: f64,
    /// potential of the `Y` operator: `2(cosh(ah/2) - 1)/h² + μ`
    pub q: f64,
    /// `r_i^{(N-2)/2}`
    pub y_scale: Vec<f64>,
}

impl Stencil {
    pub fn new(params: &HardyParams, grid: &Arc<RadialGrid>) -> Self {
        let a = params.drift();
        let h = grid.h();
        let w_lo = (-0.5 * a * h).exp();
        let w_hi = (0.5 * a * h).exp();
        let q = 2.0 * ((0.5 * a * h).cosh() - 1.0) / (h * h) + params.mu();
        let y_scale = grid.log_radii().iter().map(|&t| (0.5 * a * t).exp()).collect();
        Self {
            grid: Arc::clone(grid),
            params: *params,
            w_lo,
            w_hi,
            q,
            y_scale,
        }
    }

    /// `T = tridiag(-1, 2 + h²q, -1)/h²` on the interior nodes.
    pub fn matrix(&self) -> Tridiagonal {
        let n = self.grid.n();
        let h2 = self.grid.h() * self.grid.h();
        Tridiagonal {
            lower: vec![-1.0 / h2; n],
            diag: vec![2.0 / h2 + self.q; n],
            upper: vec![-1.0 / h2; n],
        }
    }

    /// `(L u)_i` at an interior node.
    pub fn apply_at(&self, u: &[f64], i: usize) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        let r = self.grid.radii()[i];
        let flux = -self.w_hi * (u[i + 1] - u[i]) + self.w_lo * (u[i] - u[i - 1]);
        (flux / h2 + self.params.mu() * u[i]) / (r * r)
    }

    /// Factor mapping `f` onto the right-hand side of `T Y = g`: `r^{(N-2)/2 + 2}`.
    pub fn rhs_scale(&self, i: usize) -> f64 {
        let r = self.grid.radii()[i];
        self.y_scale[i] * r * r
    }
}

fn ensure_finite(u: &GridFunction) -> Result<()> {
    if u.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(HslError::Numeric("non-finite grid values".into()))
    }
}

/// Discrete `-u'' - (N-1)u'/r + μu/r²` at interior nodes; boundary nodes carry 0.
pub fn apply_l(params: &HardyParams, u: &GridFunction) -> Result<GridFunction> {
    ensure_finite(u)?;
    let st = Stencil::new(params, u.grid());
    let mut out = vec![0.0; u.grid().len()];
    for i in u.grid().interior() {
        out[i] = st.apply_at(u.values(), i);
    }
    GridFunction::new(Arc::clone(u.grid()), out)
}

/// Discrete `L*_μ ξ = -ξ'' - (N-1+2τ₊)ξ'/r` at interior nodes (conservative
/// form with weight `r^{N-2+2τ₊}`); boundary nodes carry 0.
pub fn apply_l_star(params: &HardyParams, xi: &GridFunction) -> Result<GridFunction> {
    ensure_finite(xi)?;
    let grid = xi.grid();
    let b = params.drift() + 2.0 * params.tau_plus();
    let h = grid.h();
    let (w_lo, w_hi) = ((-0.5 * b * h).exp(), (0.5 * b * h).exp());
    let x = xi.values();
    let mut out = vec![0.0; grid.len()];
    for i in grid.interior() {
        let r = grid.radii()[i];
        let flux = -w_hi * (x[i + 1] - x[i]) + w_lo * (x[i] - x[i - 1]);
        out[i] = flux / (h * h * r * r);
    }
    GridFunction::new(Arc::clone(grid), out)
}

/// Trapezoid rule in `t = ln r` for `∫_{r_min}^1 f dμ`.
pub fn integrate_dmu(params: &HardyParams, f: &GridFunction) -> Result<f64> {
    ensure_finite(f)?;
    let g = f.grid();
    let s: f64 = g
        .radii()
        .iter()
        .zip(f.values())
        .enumerate()
        .map(|(i, (&r, &v))| g.trapezoid_weight(i) * v * params.measure_weight_unchecked(r) * r)
        .sum();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_layout() {
        let g = build_grid(0.5, 16).unwrap();
        assert_eq!(g.len(), 18);
        assert!((g.h() - 2f64.ln() / 17.0).abs() < 1e-15);
        assert_eq!(*g.radii().last().unwrap(), 1.0);
        assert_eq!(g.radii()[0], 0.5);

        // uniform in s with s = 4, 3.8, ..., 0
        let g = build_grid((-4.0f64).exp(), 19).unwrap();
        for (i, &r) in g.radii().iter().enumerate() {
            let s = 4.0 - 0.2 * i as f64;
            assert!((r - (-s).exp()).abs() < 1e-14, "node {i}");
        }
    }

    #[test]
    fn grid_invariants_large() {
        let g = build_grid(1e-6, 4096).unwrap();
        let r = g.radii();
        for i in 0..r.len() - 1 {
            assert!(r[i] < r[i + 1]);
            assert!(((r[i + 1] / r[i]).ln() - g.h()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(0.0, 32).is_err());
        assert!(build_grid(1.0, 32).is_err());
        assert!(build_grid(0.1, 3).is_err());
    }

    #[test]
    fn grid_function_rejects_nan_and_length() {
        let g = build_grid(0.1, 16).unwrap();
        assert!(GridFunction::new(Arc::clone(&g), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.len()];
        v[4] = f64::NAN;
        assert!(matches!(
            GridFunction::new(Arc::clone(&g), v),
            Err(HslError::Numeric(_))
        ));
    }

    #[test]
    fn laplacian_of_r_squared() {
        let p = HardyParams::new(3, 0.0, 2.0).unwrap();
        let g = build_grid(1e-3, 400).unwrap();
        let u = GridFunction::from_fn(&g, |r| r * r).unwrap();
        let lu = apply_l(&p, &u).unwrap();
        for i in g.interior() {
            assert!((lu.values()[i] + 6.0).abs() < 1e-3, "{}", lu.values()[i]);
        }
        assert_eq!(lu.values()[0], 0.0);
        assert_eq!(*lu.values().last().unwrap(), 0.0);
    }

    fn relative_kernel_residual(p: &HardyParams, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let g = build_grid(1e-4, n).unwrap();
        let u = GridFunction::from_fn(&g, &f).unwrap();
        let lu = apply_l(p, &u).unwrap();
        g.interior()
            .map(|i| {
                let r = g.radii()[i];
                (lu.values()[i] * r * r / f(r)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn fundamental_solutions_are_discrete_kernel_to_second_order() {
        let p = HardyParams::new(3, 2.0, 1.5).unwrap();
        for f in [|r: f64| r.powi(-2), |r: f64| r] {
            let coarse = relative_kernel_residual(&p, 200, f);
            let fine = relative_kernel_residual(&p, 401, f);
            let order = (coarse / fine).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn l_star_of_constant_vanishes() {
        let p = HardyParams::new(3, 2.0, 1.5).unwrap();
        let g = build_grid(1e-3, 64).unwrap();
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        let out = apply_l_star(&p, &one).unwrap();
        assert!(out.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn l_star_matches_symbolic_derivative() {
        // ξ = (1-r²)², ξ' = -4r(1-r²), ξ'' = -4 + 12r², N=3, μ=0:
        // -ξ'' - 2ξ'/r = 12 - 20r².
        let p = HardyParams::new(3, 0.0, 2.0).unwrap();
        let err = |n: usize| {
            let g = build_grid(1e-3, n).unwrap();
            let xi = GridFunction::from_fn(&g, |r| (1.0 - r * r).powi(2)).unwrap();
            let out = apply_l_star(&p, &xi).unwrap();
            g.interior()
                .map(|i| {
                    let r = g.radii()[i];
                    (out.values()[i] - (12.0 - 20.0 * r * r)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(300), err(601));
        assert!(b < 1e-2, "{b}");
        assert!((a / b).log2() > 1.8);
    }

    #[test]
    fn quadrature_of_constants_and_powers() {
        let p = HardyParams::new(3, 0.0, 2.0).unwrap();
        let g = build_grid(1e-8, 20000).unwrap();
        let one = GridFunction::from_fn(&g, |_| 1.0).unwrap();
        let vol = integrate_dmu(&p, &one).unwrap();
        assert!((vol / (4.0 * PI / 3.0) - 1.0).abs() < 1e-5, "{vol}");
        let phi2 = GridFunction::from_fn(&g, |r| r.powi(-2)).unwrap();
        let v = integrate_dmu(&p, &phi2).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn quadrature_power_order_and_exactness() {
        // ∫_{r_min}^1 r^a dμ for N=3, μ=2 (weight 4π r^3): 4π (1 - r_min^{a+4})/(a+4)
        let p = HardyParams::new(3, 2.0, 1.5).unwrap();
        let a = -1.5;
        let r_min: f64 = 0.1;
        let exact = 4.0 * PI * (1.0 - r_min.powf(a + 4.0)) / (a + 4.0);
        let err = |n: usize| {
            let g = build_grid(r_min, n).unwrap();
            let f = GridFunction::from_fn(&g, |r| r.powf(a)).unwrap();
            (integrate_dmu(&p, &f).unwrap() - exact).abs() / exact
        };
        let order = (err(999) / err(1999)).log2();
        assert!((1.9..=2.1).contains(&order), "order {order}");
        assert!(err(1 << 20) < 1e-10);
    }

    #[test]
    fn critical_power_integral_diverges_logarithmically() {
        let p = HardyParams::new(3, 0.0, 3.0).unwrap();
        let val = |r_min: f64| {
            let g = build_grid(r_min, 2000).unwrap();
            let f = GridFunction::from_fn(&g, |r| r.powf(-3.0)).unwrap();
            integrate_dmu(&p, &f).unwrap()
        };
        let (a, b) = (val(1e-3), val(1e-6));
        // 4π ln(1/r_min)
        assert!(((b - a) / (4.0 * PI * 1e3f64.ln()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip() {
        let g = build_grid(1e-3, 20).unwrap();
        let u = GridFunction::from_fn(&g, |r| r.sin() / 3.0).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,value\n"));
        let back = GridFunction::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn interpolation_is_third_order_accurate() {
        let g = build_grid(1e-3, 500).unwrap();
        let u = GridFunction::from_fn(&g, |r| (3.0 * r).sin()).unwrap();
        let v = u.interpolate(0.5).unwrap();
        assert!((v - 1.5f64.sin()).abs() < 1e-6);
    }
}
