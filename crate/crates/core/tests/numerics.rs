mod common;

use common::{experiment, rel};
use pielou_core::model::inverse_map_c;
use pielou_core::numerics::{find_root, integrate_1d, integrate_2d};
use pielou_core::rvt::tabulate;
use pielou_core::statistics::grid_quantile;
use pielou_core::{DensityKind, DistributionSpec, Error, GridSpec, JointDensity, QuadratureConfig};

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

#[test]
fn one_dimensional_examples() {
    let e = integrate_1d(|_| 1.0, 0.0, 1.0, &cfg());
    assert!(e.converged && (e.value - 1.0).abs() < 1e-14);
    let beta = DistributionSpec::beta(2.0, 3.0).unwrap();
    let e = integrate_1d(|x| beta.density(x), 0.0, 1.0, &cfg());
    assert!(e.converged && (e.value - 1.0).abs() < 1e-12);
    let e = integrate_1d(|x| x * x, 0.0, 2.0, &cfg());
    assert!((e.value - 8.0 / 3.0).abs() < 1e-14);
    assert!(e.error <= cfg().abs_tol.max(cfg().rel_tol * e.value));
}

#[test]
fn exhausted_budget_is_flagged() {
    let tight = QuadratureConfig { max_subdivisions: 2, ..cfg() }.with_tolerances(1e-14, 1e-300);
    let e = integrate_1d(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &tight);
    assert!(!e.converged);
    assert!(e.value.is_finite());
}

#[test]
fn two_dimensional_examples() {
    let e = integrate_2d(|_, _| 1.0, (0.0, 1.0), (0.0, 1.0), &cfg());
    assert!(e.converged && (e.value - 1.0).abs() < 1e-12);
    let j = experiment();
    let e = integrate_2d(|a, b| j.a.density(a) * j.b.density(b), (1.1, 2.0), (0.0, 1.0), &cfg());
    assert!((e.value - 1.0).abs() < 1e-6, "{}", e.value);
}

/// Solution-density integrand over `(a, b)` at fixed `(x, n)`.
fn solution_integrand(x: f64, n: u32) -> impl Fn(f64, f64) -> f64 {
    let j = experiment();
    move |a, b| match inverse_map_c(x, a, b, n) {
        Some(m) => j.joint_density(m.value, a, b) * m.jacobian_abs,
        None => 0.0,
    }
}

fn midpoint_2d<F: Fn(f64, f64) -> f64>(f: F, (a0, a1): (f64, f64), (b0, b1): (f64, f64), m: usize) -> f64 {
    let (ha, hb) = ((a1 - a0) / m as f64, (b1 - b0) / m as f64);
    let mut s = 0.0;
    for i in 0..m {
        let a = a0 + (i as f64 + 0.5) * ha;
        for k in 0..m {
            s += f(a, b0 + (k as f64 + 0.5) * hb);
        }
    }
    s * ha * hb
}

#[test]
fn solution_integrand_matches_midpoint_brute_force() {
    for (x, n) in [(1.0, 3), (0.7, 1), (1.8, 6)] {
        let f = solution_integrand(x, n);
        let brute = midpoint_2d(&f, (1.1, 2.0), (0.0, 1.0), 400);
        let e = integrate_2d(&f, (1.1, 2.0), (0.0, 1.0), &cfg());
        assert!(rel(e.value, brute) < 5e-5, "x = {x}, n = {n}: {} vs {brute}", e.value);
    }
}

#[test]
fn halving_rel_tol_stays_within_error_estimates() {
    let f = solution_integrand(1.2, 4);
    for tol in [1e-3, 1e-4, 1e-5, 1e-6] {
        let coarse = integrate_2d(&f, (1.1, 2.0), (0.0, 1.0), &cfg().with_tolerances(tol, 1e-12));
        let fine = integrate_2d(&f, (1.1, 2.0), (0.0, 1.0), &cfg().with_tolerances(tol / 2.0, 1e-12));
        assert!(
            (coarse.value - fine.value).abs() <= coarse.error + fine.error,
            "tol {tol}: {} vs {}",
            coarse.value,
            fine.value
        );
    }
}

#[test]
fn root_examples() {
    assert!((find_root(|x| x - 0.3, 0.0, 1.0, 1e-14).unwrap() - 0.3).abs() < 1e-14);
    let u = DistributionSpec::uniform(1.1, 2.0).unwrap();
    assert!((find_root(|x| u.cdf(x) - 0.5, 1.1, 2.0, 1e-14).unwrap() - 1.55).abs() < 1e-13);
    assert!(matches!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::NoBracket { .. })));
}

#[test]
fn grid_quantile_matches_dense_inversion() {
    let j = experiment();
    let grid = tabulate(DensityKind::SolutionAtPeriod(3), &j, &cfg(), &GridSpec::linear(0.3, 2.2, 128)).unwrap();
    let target = 0.995 * grid.mass;
    let q = grid_quantile(&grid, target).unwrap();
    // oracle: scan the cumulative trapezoid and solve the quadratic on the segment
    let cum = grid.cumulative();
    let i = cum.iter().position(|&c| c >= target).unwrap();
    let (x0, x1) = (grid.abscissae[i - 1], grid.abscissae[i]);
    let (y0, y1) = (grid.values[i - 1], grid.values[i]);
    let (h, r) = (x1 - x0, target - cum[i - 1]);
    let slope = (y1 - y0) / h;
    let t = if slope.abs() < 1e-300 { r / y0 } else { (-y0 + (y0 * y0 + 2.0 * slope * r).sqrt()) / slope };
    let tol = (2.2 - 0.3) * 1e-12;
    assert!((q - (x0 + t)).abs() < 10.0 * tol, "{q} vs {}", x0 + t);
}
