//! Energy, gradient and the path-deformation search for the second solution.

use hsl_core::mountain_pass::{
    beta_estimate, energy, energy_gradient, energy_state, gradient_pairing, mountain_pass_solve, mu_norm,
    nonlinear_primitive_f, write_trace_csv, MountainPassOptions,
};
use hsl_core::stability::sigma1;
use hsl_core::{apply_l, build_grid, minimal_solution, GridFunction, HardyParams, HslError, IterationOptions};
use proptest::prelude::*;

fn setup(kappa: f64) -> (HardyParams, GridFunction) {
    let hp = HardyParams::new(3, 0.0, 2.0).unwrap();
    let g = build_grid(1e-8, 1024).unwrap();
    let u = minimal_solution(&hp, &g, kappa, &IterationOptions::default()).unwrap();
    assert!(u.converged());
    (hp, u.profile)
}

#[test]
fn primitive_examples() {
    assert_eq!(nonlinear_primitive_f(2.0, 3.0, 0.0), 0.0);
    assert_eq!(nonlinear_primitive_f(2.0, 3.0, -1.0), 0.0);
    assert!((nonlinear_primitive_f(2.0, 1.0, 1.0) - 4.0 / 3.0).abs() < 1e-14);
    assert!((nonlinear_primitive_f(2.5, 0.0, 2.0) - 2f64.powf(3.5) / 3.5).abs() < 1e-13);
}

#[test]
fn solve_produces_the_upper_solution() {
    let (hp, u) = setup(0.6);
    let g = u.grid().clone();
    let out = mountain_pass_solve(&hp, &u, &MountainPassOptions::default()).unwrap();
    let v = &out.state.v;
    assert!(g.interior().all(|i| v.values()[i] > 0.0));
    assert!(out.state.energy >= out.beta && out.beta > 0.0);
    let scale = mu_norm(&hp, v).unwrap().max(1.0);
    assert!(out.state.grad_norm <= MountainPassOptions::default().tol * scale);

    // u + v solves L w = w^p to discretization accuracy
    let w = u.zip_with(v, |a, b| a + b).unwrap();
    let lw = apply_l(&hp, &w).unwrap();
    for i in g.interior().filter(|&i| g.radii()[i] > 1e-3) {
        let rhs = w.values()[i].powi(2);
        assert!((lw.values()[i] - rhs).abs() < 1e-6 * (1.0 + rhs) / g.radii()[i].powi(2));
    }
    // the upper branch is unstable
    assert!(sigma1(&hp, &w).unwrap().sigma1 < 1.0);
}

#[test]
fn path_levels_never_increase() {
    let (hp, u) = setup(0.6);
    let out = mountain_pass_solve(&hp, &u, &MountainPassOptions::default()).unwrap();
    assert!(out.levels.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.levels);
    let path = &out.path;
    assert_eq!(path.points.len(), MountainPassOptions::default().path_points);
    assert!(path.points[0].values().iter().all(|&x| x == 0.0));
    assert!(energy(&hp, &u, path.points.last().unwrap()).unwrap() <= 0.0);
}

#[test]
fn sphere_geometry_is_positive() {
    let (hp, u) = setup(0.3);
    assert!(beta_estimate(&hp, &u, 0.1).unwrap() > 0.0);
}

#[test]
fn trace_exports_as_csv() {
    let (hp, u) = setup(0.3);
    let out = mountain_pass_solve(&hp, &u, &MountainPassOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&out.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,path_index,energy"));
    assert_eq!(lines.count(), out.trace.len());
}

#[test]
fn energy_rejects_profiles_not_vanishing_at_the_ends() {
    let (hp, u) = setup(0.3);
    let bad = GridFunction::from_fn(u.grid(), |_| 1.0).unwrap();
    assert!(matches!(energy(&hp, &u, &bad), Err(HslError::InvalidInput(_))));
}

#[test]
fn gradient_vanishes_at_zero() {
    let (hp, u) = setup(0.3);
    let g = energy_gradient(&hp, &u, &GridFunction::zeros(u.grid())).unwrap();
    assert!(g.values().iter().all(|&x| x == 0.0));
    let st = energy_state(&hp, &u, &GridFunction::zeros(u.grid())).unwrap();
    assert_eq!(st.energy, 0.0);
    assert_eq!(st.grad_norm, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn directional_derivative_matches_pairing(
        a in 0.1f64..3.0,
        b in -1.0f64..1.0,
        c in 0.2f64..2.0,
        d in -1.0f64..1.0,
    ) {
        let hp = HardyParams::new(3, 1.0, 2.0).unwrap();
        let g = build_grid(1e-6, 400).unwrap();
        let u = minimal_solution(&hp, &g, 0.2, &IterationOptions::default()).unwrap().profile;
        let span = (1.0 / g.r_min()).ln();
        let bump = |x: f64, y: f64| move |r: f64| {
            let (s, t) = ((r / 1e-6f64).ln() / span, -r.ln() / span);
            s * t * (x + y * s)
        };
        let v = GridFunction::from_fn(&g, bump(a, b)).unwrap();
        let w = GridFunction::from_fn(&g, bump(c, d)).unwrap();
        let eps = 1e-5;
        let fd = (energy(&hp, &u, &v.zip_with(&w, |x, y| x + eps * y).unwrap()).unwrap()
            - energy(&hp, &u, &v.zip_with(&w, |x, y| x - eps * y).unwrap()).unwrap())
            / (2.0 * eps);
        let exact = gradient_pairing(&hp, &energy_gradient(&hp, &u, &v).unwrap(), &w).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "fd {} exact {}", fd, exact);
    }
}
