mod common;

use common::{mobile_lines, reference_params};
use pielou_core::calibration::objective;
use pielou_core::model::{inverse_map_b, inverse_map_c, inverse_map_hitting, solve_at, solve_closed_form};
use pielou_core::montecarlo::simulate;
use pielou_core::numerics::integrate_2d;
use pielou_core::rvt::{density_at, tabulate};
use pielou_core::statistics::{chebyshev_bound, confidence_interval, interval_probability};
use pielou_core::{
    DataSeries, DensityGrid, DensityKind, DistributionSpec, GridSpec, JointDensity, JointInputs, MomentReport,
    PielouPoint, QuadratureConfig,
};
use proptest::prelude::*;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn point() -> impl Strategy<Value = PielouPoint> {
    (0.05f64..5.0, 1.02f64..3.0, 0.01f64..1.0).prop_map(|(c, a, b)| PielouPoint::new(c, a, b).unwrap())
}

fn initial_law() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (0.1f64..1.0, 0.05f64..1.0).prop_map(|(lo, w)| DistributionSpec::uniform(lo, lo + w).unwrap()),
        (0.3f64..2.0, 0.01f64..0.2).prop_map(|(m, s)| DistributionSpec::truncated_gaussian(m, s, 0.0, 3.0).unwrap()),
        (1.5f64..4.0, 1.5f64..4.0).prop_map(|(a, b)| DistributionSpec::beta(a, b).unwrap()),
    ]
}

fn growth_law() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (1.05f64..1.6, 0.05f64..0.6).prop_map(|(lo, w)| DistributionSpec::uniform(lo, lo + w).unwrap()),
        (1.2f64..2.0, 0.005f64..0.08).prop_map(|(m, s)| DistributionSpec::gaussian(m, s).unwrap()),
    ]
}

fn crowding_law() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (2.0f64..5.0, 2.0f64..5.0).prop_map(|(a, b)| DistributionSpec::beta(a, b).unwrap()),
        (0.05f64..0.3, 0.05f64..0.3).prop_map(|(lo, w)| DistributionSpec::uniform(lo, lo + w).unwrap()),
        (0.1f64..0.3, 0.002f64..0.02).prop_map(|(m, s)| DistributionSpec::truncated_gaussian(m, s, 0.0, 1.0).unwrap()),
    ]
}

fn inputs() -> impl Strategy<Value = JointInputs> {
    (initial_law(), growth_law(), crowding_law()).prop_map(|(c, a, b)| JointInputs::new(c, a, b))
}

fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1e-3);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Triangular-ish density with a random shape, normalized on `[0, 1]`.
fn random_grid(w: &[f64]) -> DensityGrid {
    let xs: Vec<f64> = (0..w.len()).map(|i| i as f64 / (w.len() - 1) as f64).collect();
    let tmp = DensityGrid::new(DensityKind::SteadyState, xs.clone(), w.to_vec(), true, 0.0, cfg()).unwrap();
    let ys = w.iter().map(|v| v / tmp.mass).collect();
    DensityGrid::new(DensityKind::SteadyState, xs, ys, true, 0.0, cfg()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobians_match_finite_differences(q in point(), n in 1u32..=12) {
        let x = solve_closed_form(&q, n);
        let s = (q.a - 1.0) / q.b;
        prop_assume!((x - s).abs() > 1e-3 * s);
        let jc = inverse_map_c(x, q.a, q.b, n).unwrap().jacobian_abs;
        let dc = fd(|t| inverse_map_c(t, q.a, q.b, n).map_or(f64::NAN, |m| m.value), x).abs();
        prop_assert!(((jc - dc) / jc).abs() < 1e-5, "c: {} vs {}", jc, dc);
        let jb = inverse_map_b(x, q.a, q.c, n).unwrap().unwrap().jacobian_abs;
        let db = fd(|t| inverse_map_b(t, q.a, q.c, n).unwrap().map_or(f64::NAN, |m| m.value), x).abs();
        prop_assert!(((jb - db) / jb).abs() < 1e-5, "b: {} vs {}", jb, db);
    }

    #[test]
    fn hitting_jacobian_matches_finite_differences(q in point(), frac in 0.1f64..0.9, n in 0.5f64..20.0) {
        let s = (q.a - 1.0) / q.b;
        let x_hat = frac * s;
        let Some(m) = inverse_map_hitting(n, q.a, q.b, x_hat) else { return Ok(()) };
        prop_assert!(((solve_at(&PielouPoint::new(m.value, q.a, q.b).unwrap(), n) - x_hat) / x_hat).abs() < 1e-9);
        let d = fd(|t| inverse_map_hitting(t, q.a, q.b, x_hat).map_or(f64::NAN, |m| m.value), n).abs();
        prop_assume!(d.is_finite() && m.jacobian_abs > 1e-12 * m.value);
        prop_assert!(((m.jacobian_abs - d) / m.jacobian_abs).abs() < 1e-5, "{} vs {}", m.jacobian_abs, d);
    }

    #[test]
    fn cdf_quantile_round_trip(d in prop_oneof![initial_law(), growth_law(), crowding_law()], p in 0.001f64..0.999) {
        let x = d.quantile(p);
        prop_assert!((d.cdf(x) - p).abs() < 1e-9);
        prop_assert!(d.cdf(x * 0.999) <= d.cdf(x) + 1e-15);
        prop_assert!((d.cdf(x) + d.sf(x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn confidence_intervals_nest(w in prop::collection::vec(0.01f64..1.0, 16..64), a1 in 0.01f64..0.9, a2 in 0.01f64..0.9) {
        let g = random_grid(&w);
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let wide = confidence_interval(&g, lo).unwrap();
        let narrow = confidence_interval(&g, hi).unwrap();
        prop_assert!(wide.z1 <= narrow.z1 + 1e-12 && wide.z2 >= narrow.z2 - 1e-12);
        prop_assert!(((wide.achieved_mass - (1.0 - lo)).abs()) < 1e-9);
    }

    #[test]
    fn chebyshev_dominates_on_any_grid(w in prop::collection::vec(0.0f64..1.0, 16..64), scale in 0.05f64..3.0) {
        prop_assume!(w.iter().sum::<f64>() > 0.5);
        let g = random_grid(&w);
        let first: f64 = g.abscissae.windows(2).zip(g.values.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (x[0] * y[0] + x[1] * y[1]) / 2.0).sum();
        let second: f64 = g.abscissae.windows(2).zip(g.values.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (x[0] * x[0] * y[0] + x[1] * x[1] * y[1]) / 2.0).sum();
        let variance = (second - first * first).max(0.0);
        let report = MomentReport {
            kind: g.kind, mean: first, variance, sd: variance.sqrt(), raw: vec![1.0, first, second], converged: true,
        };
        let lambda = scale * report.sd;
        let inside = interval_probability(&g, first - lambda, first + lambda);
        // the trapezoidal moments are exact only up to the grid's interpolation error
        prop_assert!(1.0 - inside <= chebyshev_bound(&report, lambda) + 0.02);
    }

    #[test]
    fn objective_is_invariant_under_row_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let data = mobile_lines();
        let mut rows: Vec<(u32, f64)> = data.rows().collect();
        rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = DataSeries::new(&rows).unwrap();
        let coarse = cfg().with_tolerances(1e-4, 1e-9);
        prop_assert_eq!(objective(&reference_params(), &data, &coarse), objective(&reference_params(), &shuffled, &coarse));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn densities_are_non_negative(j in inputs(), n in 0u32..20, t in 0.01f64..20.0, x_hat in 0.2f64..5.0) {
        for kind in [DensityKind::SolutionAtPeriod(n), DensityKind::SteadyState, DensityKind::HittingTime(x_hat)] {
            let e = density_at(kind, &j, t, &cfg());
            prop_assert!(e.value >= 0.0 && e.value.is_finite(), "{}: {:?}", kind, e);
        }
    }

    #[test]
    fn input_products_have_unit_mass(j in inputs()) {
        let c = cfg();
        let bx = j.effective_box(c.gaussian_truncation_k);
        let ab = integrate_2d(|a, b| j.a.density(a) * j.b.density(b), bx.a, bx.b, &c);
        prop_assert!((ab.value - 1.0).abs() < 10.0 * c.rel_tol, "{:?}", ab);
        let cb = integrate_2d(|x, b| j.c.density(x) * j.b.density(b), bx.c, bx.b, &c);
        prop_assert!((cb.value - 1.0).abs() < 10.0 * c.rel_tol, "{:?}", cb);
    }

    #[test]
    fn simulation_is_reproducible(j in inputs(), n in 0u32..20, seed in any::<u64>()) {
        let kind = DensityKind::SolutionAtPeriod(n);
        let a = simulate(kind, &j, 20_000, seed).unwrap();
        let b = simulate(kind, &j, 20_000, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tighter_tolerance_keeps_grids_close(j in inputs(), n in 1u32..10) {
        let spec = GridSpec::linear(0.05, 6.0, 24);
        let kind = DensityKind::SolutionAtPeriod(n);
        let loose = tabulate(kind, &j, &cfg().with_tolerances(1e-4, 1e-9), &spec).unwrap();
        let tight = tabulate(kind, &j, &cfg().with_tolerances(1e-8, 1e-12), &spec).unwrap();
        prop_assert!(loose.l1_distance(&tight) < 1e-3 * tight.mass.max(1e-3), "{}", loose.l1_distance(&tight));
    }
}
