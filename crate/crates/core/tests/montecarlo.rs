mod common;

use common::{experiment, experiment_steady_mean, ks_against, reference_params};
use pielou_core::model::{hitting_period, solve_at};
use pielou_core::montecarlo::{
    kernel_density_grid, ks_distance, simulate, simulate_hitting_time, simulate_solution, simulate_steady_state,
};
use pielou_core::rvt::{default_grid_spec, tabulate};
use pielou_core::{
    DensityGrid, DensityKind, DistributionSpec, Error, GridSpec, JointInputs, PielouPoint, QuadratureConfig,
    SimulationResult,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_grid(kind: DensityKind, j: &JointInputs, points: usize) -> DensityGrid {
    let cfg = QuadratureConfig::default();
    tabulate(kind, j, &cfg, &default_grid_spec(kind, j, points).unwrap()).unwrap()
}

fn gaussian_inputs(scale: f64) -> JointInputs {
    JointInputs::new(
        DistributionSpec::gaussian(1.0, 0.01 * scale).unwrap(),
        DistributionSpec::gaussian(1.5, 0.01 * scale).unwrap(),
        DistributionSpec::gaussian(0.1, 0.001 * scale).unwrap(),
    )
}

#[test]
fn period_zero_reproduces_the_initial_law() {
    let j = experiment();
    let sim = simulate_solution(&j, 0, 100_000, 1).unwrap();
    assert_eq!(sim.count, 100_000);
    assert_eq!(sim.samples.len(), sim.count);
    let ks = ks_against(&sim.samples, |x| j.c.cdf(x));
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn spread_shrinks_with_the_inputs() {
    let wide = simulate_solution(&gaussian_inputs(1.0), 4, 200_000, 3).unwrap().sd();
    let narrow = simulate_solution(&gaussian_inputs(0.1), 4, 200_000, 3).unwrap().sd();
    let ratio = wide / narrow;
    assert!((ratio - 10.0).abs() < 0.5, "sd ratio {ratio}");
}

#[test]
fn period_five_matches_density_grid() {
    let j = experiment();
    let kind = DensityKind::SolutionAtPeriod(5);
    let g = default_grid(kind, &j, 512);
    let sim = simulate(kind, &j, 1_000_000, 21).unwrap();
    let ks = ks_distance(&sim, &g);
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn steady_state_sample_mean() {
    let sim = simulate_steady_state(&experiment(), 1_000_000, 8).unwrap();
    assert!(sim.samples.iter().all(|&x| x > 0.0));
    let want = experiment_steady_mean();
    let tol = 3.0 * sim.sd() / (sim.count as f64).sqrt();
    assert!((sim.mean() - want).abs() < tol, "mean {} vs {want} (tol {tol})", sim.mean());
}

#[test]
fn point_mass_inputs_give_point_mass_steady_state() {
    let sim = simulate_steady_state(&gaussian_inputs(1e-6), 10_000, 4).unwrap();
    assert!(sim.samples.iter().all(|&x| (x - 5.0).abs() < 1e-3));
}

#[test]
fn level_at_the_median_initial_size() {
    let j = reference_params().inputs().unwrap();
    let median = j.c.quantile(0.5);
    let sim = simulate_hitting_time(&j, median, 200_000, 6).unwrap();
    let at_or_before = sim.samples.iter().filter(|&&n| n <= 0.0).count() as f64 / sim.count as f64;
    assert!((at_or_before - 0.5).abs() < 0.01, "fraction {at_or_before}");
}

#[test]
fn hitting_five_sample_mode_near_nine() {
    let j = reference_params().inputs().unwrap();
    let sim = simulate_hitting_time(&j, 5.0, 1_000_000, 12).unwrap();
    let width = 0.5;
    let mut bins = vec![0usize; 80];
    for &n in &sim.samples {
        if (0.0..40.0).contains(&n) {
            bins[(n / width) as usize] += 1;
        }
    }
    let best = (0..bins.len()).max_by_key(|&i| bins[i]).unwrap();
    let mode = (best as f64 + 0.5) * width;
    assert!((mode - 9.0).abs() <= 1.0, "mode {mode}");
    assert!(sim.unreachable > 0);
    assert_eq!(sim.draws, sim.count + sim.unreachable);
}

#[test]
fn sampled_periods_return_to_the_level() {
    let j = reference_params().inputs().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 10_000 {
        let (c, a, b) = j.sample(&mut rng);
        let Ok(p) = PielouPoint::new(c, a, b) else { continue };
        if !(3.0 < (a - 1.0) / b && c < (a - 1.0) / b) {
            continue;
        }
        let n = hitting_period(&p, 3.0).unwrap();
        let x = solve_at(&p, n);
        assert!(((x - 3.0) / 3.0).abs() < 1e-8, "{p:?}: {x}");
        checked += 1;
    }
}

#[test]
fn kernel_estimate_of_the_same_samples_is_close() {
    let j = experiment();
    let kind = DensityKind::SolutionAtPeriod(2);
    let sim = simulate(kind, &j, 200_000, 2).unwrap();
    let spec = default_grid_spec(kind, &j, 1024).unwrap();
    let kde = kernel_density_grid(&sim, &spec).unwrap();
    let ks = ks_distance(&sim, &kde);
    assert!(ks < 0.01, "KS {ks}");
}

#[test]
fn uniform_samples_have_root_n_distance() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let count = 100_000;
    let samples: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
    let result = SimulationResult {
        kind: DensityKind::SteadyState,
        samples,
        seed: 77,
        count,
        draws: count,
        rejected: 0,
        unreachable: 0,
    };
    let g = DensityGrid::new(DensityKind::SteadyState, vec![0.0, 1.0], vec![1.0, 1.0], true, 0.0, QuadratureConfig::default())
        .unwrap();
    let ks = ks_distance(&result, &g);
    // 99% critical value of the one-sample statistic
    assert!(ks < 1.63 / (count as f64).sqrt(), "KS {ks}");
    assert!(ks > 0.0);
}

#[test]
fn late_period_is_closer_to_its_own_density() {
    let j = experiment();
    let spec = GridSpec::log(0.05, 1e4, 1024);
    let cfg = QuadratureConfig::default();
    let own = tabulate(DensityKind::SolutionAtPeriod(15), &j, &cfg, &spec).unwrap();
    let steady = tabulate(DensityKind::SteadyState, &j, &cfg, &spec).unwrap();
    let sim = simulate_solution(&j, 15, 1_000_000, 15).unwrap();
    let (d_own, d_steady) = (ks_distance(&sim, &own), ks_distance(&sim, &steady));
    assert!(d_own < d_steady, "{d_own} vs {d_steady}");
    assert!(d_steady < 0.05, "KS against the steady state {d_steady}");
}

#[test]
fn simulation_is_deterministic() {
    let j = experiment();
    let a = simulate_solution(&j, 4, 50_000, 123).unwrap();
    let b = simulate_solution(&j, 4, 50_000, 123).unwrap();
    assert_eq!(a, b);
    let c = simulate_solution(&j, 4, 50_000, 124).unwrap();
    assert_ne!(a.samples, c.samples);
    // independent of the worker count
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let triple = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let s1 = single.install(|| simulate_steady_state(&j, 300_000, 5).unwrap());
    let s3 = triple.install(|| simulate_steady_state(&j, 300_000, 5).unwrap());
    assert_eq!(s1, s3);
}

#[test]
fn inconsistent_or_unreachable_inputs_fail() {
    let mostly_invalid = JointInputs::new(
        DistributionSpec::uniform(0.5, 1.0).unwrap(),
        DistributionSpec::gaussian(0.9, 0.1).unwrap(),
        DistributionSpec::uniform(0.1, 0.2).unwrap(),
    );
    assert!(matches!(simulate_solution(&mostly_invalid, 3, 1000, 1), Err(Error::InconsistentInputs(_))));
    let j = experiment();
    assert!(matches!(simulate_hitting_time(&j, 1e6, 1000, 1), Err(Error::Domain(_))));
    assert!(simulate_hitting_time(&j, -1.0, 1000, 1).is_err());
}

#[test]
fn samples_export_as_one_column() {
    let sim = simulate_solution(&experiment(), 1, 5, 9).unwrap();
    let mut buf = Vec::new();
    sim.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sample");
    assert_eq!(lines.len(), 6);
    for (line, x) in lines[1..].iter().zip(&sim.samples) {
        assert_eq!(line.parse::<f64>().unwrap(), *x);
    }
}
