//! Independent oracles for `N = 3, μ = 0, p = 2`, where `-Δu = u²` is
//! integrated as an ODE in `t = ln r`.
#![allow(dead_code)]

pub mod shooting {
    const R0: f64 = 1e-8;
    const DT: f64 = 1e-3;
    /// Integration stops here if no zero has been met.
    const T_END: f64 = 4.0;

    /// `y'' + y' = -e^{2t} y²` with `y = u(e^t)`.
    fn rhs(t: f64, y: f64, dy: f64) -> (f64, f64) {
        (dy, -dy - (2.0 * t).exp() * y * y)
    }

    /// Outward integration from `u ≈ 1/r - ln r + a`, returning the first zero
    /// `R(a)` and the values sampled at the requested radii (ascending, below the zero).
    pub fn shoot(a: f64, sample_at: &[f64]) -> Option<(f64, Vec<f64>)> {
        let t = R0.ln();
        integrate(t, 1.0 / R0 - t + a, -1.0 / R0 - 1.0, sample_at)
    }

    /// The regular solution with `u(0) = 1`, `u ≈ 1 - r²/6`.
    pub fn shoot_regular(sample_at: &[f64]) -> Option<(f64, Vec<f64>)> {
        integrate(R0.ln(), 1.0 - R0 * R0 / 6.0, -R0 * R0 / 3.0, sample_at)
    }

    /// Value at `r = 0.5` of the positive regular solution on the unit ball.
    pub fn ground_state_at_half() -> f64 {
        let (z, _) = shoot_regular(&[]).unwrap();
        let (_, s) = shoot_regular(&[0.5 * z]).unwrap();
        z * z * s[0]
    }

    fn integrate(t0: f64, y0: f64, dy0: f64, sample_at: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (mut t, mut y, mut dy) = (t0, y0, dy0);
        let mut samples = Vec::with_capacity(sample_at.len());
        let mut next = 0;
        while t < T_END {
            let (k1y, k1d) = rhs(t, y, dy);
            let (k2y, k2d) = rhs(t + 0.5 * DT, y + 0.5 * DT * k1y, dy + 0.5 * DT * k1d);
            let (k3y, k3d) = rhs(t + 0.5 * DT, y + 0.5 * DT * k2y, dy + 0.5 * DT * k2d);
            let (k4y, k4d) = rhs(t + DT, y + DT * k3y, dy + DT * k3d);
            let y1 = y + DT / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            let dy1 = dy + DT / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            let t1 = t + DT;
            // cubic Hermite on the step for samples and the zero
            let hermite = |s: f64| {
                let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
                let h10 = s.powi(3) - 2.0 * s * s + s;
                let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
                let h11 = s.powi(3) - s * s;
                h00 * y + h10 * DT * dy + h01 * y1 + h11 * DT * dy1
            };
            while next < sample_at.len() && sample_at[next].ln() <= t1 {
                samples.push(hermite((sample_at[next].ln() - t) / DT));
                next += 1;
            }
            if y1 <= 0.0 {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if hermite(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let zero = (t + 0.5 * (lo + hi) * DT).exp();
                samples.truncate(sample_at.iter().take_while(|&&r| r < zero).count());
                return Some((zero, samples));
            }
            t = t1;
            y = y1;
            dy = dy1;
        }
        None
    }

    /// First zero `R(a)`; the solution rescaled to the unit ball has amplitude `R`.
    pub fn first_zero(a: f64) -> f64 {
        shoot(a, &[]).map(|(z, _)| z).unwrap_or(f64::INFINITY)
    }

    /// Regular-part value maximizing `R`, found by golden-section search.
    fn fold_parameter() -> f64 {
        let (mut lo, mut hi) = (-20.0, 20.0);
        let samples: Vec<f64> = (0..=80).map(|k| lo + (hi - lo) * k as f64 / 80.0).collect();
        let best = samples
            .iter()
            .copied()
            .max_by(|a, b| first_zero(*a).partial_cmp(&first_zero(*b)).unwrap())
            .unwrap();
        lo = best - 0.5;
        hi = best + 0.5;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (first_zero(x1), first_zero(x2));
        for _ in 0..60 {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = first_zero(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = first_zero(x2);
            }
        }
        0.5 * (lo + hi)
    }

    /// `κ* = max_a R(a)`.
    pub fn kappa_star() -> f64 {
        first_zero(fold_parameter())
    }

    /// Values at `r = 0.5` of the two solutions with amplitude `kappa < κ*`,
    /// lower branch first.
    pub fn branch_values_at_half(kappa: f64) -> (f64, f64) {
        let a_star = fold_parameter();
        let root = |mut lo: f64, mut hi: f64| {
            // R(lo) - κ and R(hi) - κ have opposite signs
            let sign_lo = first_zero(lo) > kappa;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (first_zero(mid) > kappa) == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let a_lo = root(-1e3, a_star);
        let mut far = a_star + 1.0;
        while first_zero(far) > kappa {
            far *= 2.0;
        }
        let a_hi = root(a_star, far);
        let value = |a: f64| {
            // u_κ(x) = R² u(R x; a)
            let (z, s) = shoot(a, &[0.5 * first_zero(a)]).unwrap();
            z * z * s[0]
        };
        (value(a_lo), value(a_hi))
    }
}
