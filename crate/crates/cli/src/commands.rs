use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use pielou_core::calibration::{self, FitResult};
use pielou_core::montecarlo;
use pielou_core::rvt::{default_grid_spec, tabulate};
use pielou_core::statistics::{self, MASS_TOLERANCE};
use pielou_core::{DataSeries, DensityGrid, DensityKind, Error, GridSpec, JointInputs, ModelParams};

use crate::args::{Cli, Command, Common, SimKind};
use crate::config::{RunConfig, DEFAULT_COUNT};
use crate::error::{CliError, CliResult};

const DEFAULT_PERIODS: [u32; 6] = [1, 2, 3, 5, 10, 15];
const DEFAULT_LEVELS: [f64; 7] = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
/// Hitting-time grids whose mass is further than this from 1 are flagged.
const HITTING_MASS_TOLERANCE: f64 = 1e-2;
const STEADY_QUANTILE: f64 = 0.9999;
const QUANTILE_SAMPLES: usize = 200_000;
/// Abscissa range used when a level is reached by no simulated trajectory.
const FALLBACK_HITTING_RANGE: (f64, f64) = (0.0, 50.0);
/// Validity mass below which a fitted input law is reported.
const VALIDITY_WARNING: f64 = 1.0 - 1e-4;

/// What a successful command leaves behind. Any warning turns the exit code
/// into 2.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn check_grid(&mut self, grid: &DensityGrid, mass_tol: f64) {
        if !grid.converged {
            self.warn(format!("{}: quadrature did not converge (largest error {:.3e})", grid.kind, grid.max_error));
        }
        if !((grid.mass - 1.0).abs() <= mass_tol) {
            self.warn(format!("{}: grid mass {:.6} differs from 1 by more than {mass_tol}", grid.kind, grid.mass));
        }
    }
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Pdf { common, n } => {
            let (cfg, out) = setup(&common)?;
            let periods = n.map(|p| p.0).or_else(|| cfg.periods.clone()).unwrap_or_else(|| DEFAULT_PERIODS.to_vec());
            pdf(&cfg, &out, &periods)
        }
        Command::Moments { common, n, alpha } => {
            let (cfg, out) = setup(&common)?;
            let periods = n.map(|p| p.0).or_else(|| cfg.periods.clone()).unwrap_or_else(|| (1..=50).collect());
            let alphas = alpha.map(|a| a.0).unwrap_or_else(|| cfg.alphas());
            moments(&cfg, &out, &periods, &alphas)
        }
        Command::Fit { common, data, alpha, fixed } => {
            let (cfg, out) = setup(&common)?;
            let alphas = alpha.map(|a| a.0).unwrap_or_else(|| cfg.alphas());
            fit(&cfg, &out, &data, &alphas, fixed)
        }
        Command::Hitting { common, x_hat } => {
            let (cfg, out) = setup(&common)?;
            let levels = x_hat.map(|x| x.0).or_else(|| cfg.x_hat.clone()).unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
            hitting(&cfg, &out, &levels)
        }
        Command::Simulate { common, kind, count, n, x_hat } => {
            let (cfg, out) = setup(&common)?;
            let kind = match kind {
                SimKind::Solution => {
                    DensityKind::SolutionAtPeriod(n.or_else(|| cfg.periods.as_ref()?.first().copied()).unwrap_or(5))
                }
                SimKind::Steady => DensityKind::SteadyState,
                SimKind::Hitting => {
                    let x = x_hat.or_else(|| cfg.x_hat.as_ref()?.first().copied()).unwrap_or(3.0);
                    if !(x > 0.0 && x.is_finite()) {
                        return Err(CliError::Usage(format!("--x-hat must be positive, got {x}")));
                    }
                    DensityKind::HittingTime(x)
                }
            };
            let count = count.or(cfg.count).unwrap_or(DEFAULT_COUNT);
            simulate(&cfg, &out, kind, count)
        }
    }
}

/// Loads the configuration, applies flag overrides and creates the output
/// directory.
fn setup(common: &Common) -> CliResult<(RunConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(points) = common.grid_points {
        if points < 2 {
            return Err(CliError::Usage(format!("--grid-points must be at least 2, got {points}")));
        }
        cfg.grid.points = points;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = Some(dir.clone());
    }
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|source| CliError::Io { path: out.clone(), source })?;
    Ok((cfg, out))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

fn write_grid(out: &mut Outcome, path: PathBuf, grid: &DensityGrid) -> CliResult<()> {
    let w = create(&path)?;
    grid.write_csv(w).map_err(|source| CliError::File { path: path.clone(), source })?;
    out.files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(out: &mut Outcome, path: PathBuf, value: &T) -> CliResult<()> {
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_at(&path))?;
    out.files.push(path);
    Ok(())
}

fn grid_for(kind: DensityKind, j: &JointInputs, cfg: &RunConfig) -> CliResult<DensityGrid> {
    let spec = default_grid_spec(kind, j, cfg.grid.points)?;
    Ok(tabulate(kind, j, &cfg.quadrature, &spec)?)
}

/// Column suffix for a confidence level: `0.25 -> "75"`, `0.005 -> "99.5"`.
fn level_label(alpha: f64) -> String {
    let pct = (1.0 - alpha) * 100.0;
    let rounded = (pct * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// `z1, z2` per level, `None` where the grid is unfit for quantiles.
fn intervals(grid: &DensityGrid, alphas: &[f64], out: &mut Outcome) -> CliResult<Vec<Option<(f64, f64)>>> {
    alphas
        .iter()
        .map(|&a| match statistics::confidence_interval(grid, a) {
            Ok(ci) => Ok(Some((ci.z1, ci.z2))),
            Err(Error::Quality(msg)) => {
                out.warn(msg);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        })
        .collect()
}

fn ci_cells(cis: &[Option<(f64, f64)>]) -> String {
    cis.iter()
        .map(|ci| match ci {
            Some((z1, z2)) => format!(",{z1},{z2}"),
            None => ",,".to_owned(),
        })
        .collect()
}

fn ci_header(alphas: &[f64]) -> String {
    alphas
        .iter()
        .map(|&a| {
            let l = level_label(a);
            format!(",z1_{l},z2_{l}")
        })
        .collect()
}

fn pdf(cfg: &RunConfig, dir: &Path, periods: &[u32]) -> CliResult<Outcome> {
    let j = cfg.joint_inputs()?;
    let mut out = Outcome::default();
    for &n in periods {
        let grid = grid_for(DensityKind::SolutionAtPeriod(n), &j, cfg)?;
        println!("{}: mass {:.6}, converged {}", grid.kind, grid.mass, grid.converged);
        out.check_grid(&grid, MASS_TOLERANCE);
        write_grid(&mut out, dir.join(format!("pdf_n{n}.csv")), &grid)?;
    }
    let steady = grid_for(DensityKind::SteadyState, &j, cfg)?;
    println!("{}: mass {:.6}, converged {}", steady.kind, steady.mass, steady.converged);
    out.check_grid(&steady, MASS_TOLERANCE);
    write_grid(&mut out, dir.join("steady.csv"), &steady)?;
    Ok(out)
}

fn moments(cfg: &RunConfig, dir: &Path, periods: &[u32], alphas: &[f64]) -> CliResult<Outcome> {
    let j = cfg.joint_inputs()?;
    let mut out = Outcome::default();
    let mut table = format!("n,mean,sd{}\n", ci_header(alphas));
    let mut row = |label: String, report: statistics::MomentReport, grid: DensityGrid, out: &mut Outcome| -> CliResult<()> {
        if !report.converged {
            out.warn(format!("{}: moment quadrature did not converge", report.kind));
        }
        let cis = intervals(&grid, alphas, out)?;
        println!("{}: mean {:.6}, sd {:.6}", report.kind, report.mean, report.sd);
        table.push_str(&format!("{label},{},{}{}\n", report.mean, report.sd, ci_cells(&cis)));
        Ok(())
    };
    for &n in periods {
        let report = statistics::moments(&j, n, &cfg.quadrature, 2)?;
        let grid = grid_for(DensityKind::SolutionAtPeriod(n), &j, cfg)?;
        row(n.to_string(), report, grid, &mut out)?;
    }
    let report = statistics::steady_state_moments(&j, &cfg.quadrature, 2)?;
    let grid = grid_for(DensityKind::SteadyState, &j, cfg)?;
    row("steady".to_owned(), report, grid, &mut out)?;
    let path = dir.join("moments.csv");
    std::fs::write(&path, table).map_err(io_at(&path))?;
    out.files.push(path);
    Ok(out)
}

#[derive(Serialize)]
struct FitReport<'a> {
    data: String,
    unit_scale: f64,
    fixed: bool,
    params: ModelParams,
    sse: f64,
    initial_sse: f64,
    evaluations: usize,
    converged: bool,
    validity_mass: f64,
    /// Observations inside each band, keyed by confidence level.
    inside: BTreeMap<String, usize>,
    observations: usize,
    warnings: &'a [String],
}

fn fit(cfg: &RunConfig, dir: &Path, data_path: &Path, alphas: &[f64], fixed: bool) -> CliResult<Outcome> {
    if cfg.inputs.is_some() {
        return Err(CliError::config("inputs", "fit works on Gaussian `params`; remove `inputs`"));
    }
    let scale = cfg.unit_scale.unwrap_or(1.0);
    let data =
        DataSeries::from_path(data_path, scale).map_err(|source| CliError::File { path: data_path.to_owned(), source })?;
    let mut out = Outcome::default();

    let result = if fixed {
        let params = cfg.params.ok_or_else(|| CliError::config("params", "missing; --fixed evaluates the given params"))?;
        let sse = calibration::objective(&params, &data, &cfg.fit.quadrature);
        FitResult { params, sse, initial_sse: sse, evaluations: 1, converged: true, trace: vec![(params, sse)] }
    } else {
        let initial = match cfg.params {
            Some(p) => p,
            None => calibration::heuristic_initial(&data)?,
        };
        calibration::fit(&data, &initial, &cfg.fit)?
    };
    if !result.converged {
        out.warn(format!("optimizer stopped after {} evaluations without converging", result.evaluations));
    }
    if result.sse >= calibration::PENALTY {
        out.warn("the objective is at its penalty value: the parameters cannot be evaluated reliably");
    }
    let j = result.params.inputs()?;
    let validity = j.validity_mass();
    if validity < VALIDITY_WARNING {
        out.warn(format!("fitted inputs put mass {validity:.6} on a > 1, b > 0, c > 0"));
    }

    let means = statistics::input_space_moments(&j, &data.periods, 1, &cfg.quadrature)?;
    let mut curve = format!("n,mean{}\n", ci_header(alphas));
    let mut residuals = format!(
        "year,n,x,mean,residual{}\n",
        alphas.iter().map(|&a| format!(",inside_{}", level_label(a))).collect::<String>()
    );
    let mut inside = vec![0usize; alphas.len()];
    for (i, (n, x)) in data.rows().enumerate() {
        let mean = means[i].value;
        if !means[i].converged {
            out.warn(format!("E[X_{n}] quadrature did not converge"));
        }
        let grid = grid_for(DensityKind::SolutionAtPeriod(n), &j, cfg)?;
        out.check_grid(&grid, MASS_TOLERANCE);
        let cis = intervals(&grid, alphas, &mut out)?;
        curve.push_str(&format!("{n},{mean}{}\n", ci_cells(&cis)));
        let flags: String = cis
            .iter()
            .zip(inside.iter_mut())
            .map(|(ci, count)| match ci {
                Some((z1, z2)) => {
                    let hit = *z1 <= x && x <= *z2;
                    *count += hit as usize;
                    format!(",{hit}")
                }
                None => ",".to_owned(),
            })
            .collect();
        residuals.push_str(&format!("{},{n},{x},{mean},{}{flags}\n", data.labels[i], x - mean));
    }

    let p = &result.params;
    println!(
        "params: mu_a {} mu_b {} mu_c {} sigma_a {} sigma_b {} sigma_c {}",
        p.mu_a, p.mu_b, p.mu_c, p.sigma_a, p.sigma_b, p.sigma_c
    );
    println!("sse {} (initial {}), {} evaluations, converged {}", result.sse, result.initial_sse, result.evaluations, result.converged);
    let inside_map: BTreeMap<String, usize> =
        alphas.iter().zip(&inside).map(|(&a, &k)| (level_label(a), k)).collect();
    for (label, k) in &inside_map {
        println!("{k} of {} observations inside the {label}% band", data.len());
    }

    for (name, text) in [("fit_curve.csv", curve), ("residuals.csv", residuals)] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_at(&path))?;
        out.files.push(path);
    }
    let mut trace = String::from("step,mu_a,mu_b,mu_c,sigma_a,sigma_b,sigma_c,sse\n");
    for (k, (q, sse)) in result.trace.iter().enumerate() {
        trace.push_str(&format!("{k},{},{},{},{},{},{},{sse}\n", q.mu_a, q.mu_b, q.mu_c, q.sigma_a, q.sigma_b, q.sigma_c));
    }
    let path = dir.join("fit_trace.csv");
    std::fs::write(&path, trace).map_err(io_at(&path))?;
    out.files.push(path);

    let fitted = RunConfig { params: Some(result.params), ..cfg.clone() };
    write_json(&mut out, dir.join("fitted_config.json"), &fitted)?;
    let warnings = out.warnings.clone();
    let report = FitReport {
        data: data_path.display().to_string(),
        unit_scale: scale,
        fixed,
        params: result.params,
        sse: result.sse,
        initial_sse: result.initial_sse,
        evaluations: result.evaluations,
        converged: result.converged,
        validity_mass: validity,
        inside: inside_map,
        observations: data.len(),
        warnings: &warnings,
    };
    write_json(&mut out, dir.join("fit_report.json"), &report)?;
    Ok(out)
}

fn upper_quantile(samples: &[f64], p: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s[((p * s.len() as f64) as usize).min(s.len() - 1)]
}

fn hitting(cfg: &RunConfig, dir: &Path, levels: &[f64]) -> CliResult<Outcome> {
    let j = cfg.joint_inputs()?;
    let mut out = Outcome::default();
    let steady = montecarlo::simulate_steady_state(&j, QUANTILE_SAMPLES, cfg.seed())?;
    let ceiling = upper_quantile(&steady.samples, STEADY_QUANTILE);
    for &x in levels {
        let kind = DensityKind::HittingTime(x);
        if x > ceiling {
            out.warn(format!(
                "level {x} lies above the steady-state {STEADY_QUANTILE} quantile {ceiling:.6}; its density is near zero"
            ));
        }
        let spec = match default_grid_spec(kind, &j, cfg.grid.points) {
            Ok(spec) => spec,
            Err(Error::Domain(_)) => GridSpec::linear(FALLBACK_HITTING_RANGE.0, FALLBACK_HITTING_RANGE.1, cfg.grid.points),
            Err(e) => return Err(e.into()),
        };
        let grid = tabulate(kind, &j, &cfg.quadrature, &spec)?;
        println!("{}: mass {:.6}, mode {:.4}, converged {}", grid.kind, grid.mass, grid.mode(), grid.converged);
        out.check_grid(&grid, HITTING_MASS_TOLERANCE);
        write_grid(&mut out, dir.join(format!("hitting_xhat{x}.csv")), &grid)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct SimulationReport {
    kind: DensityKind,
    count: usize,
    seed: u64,
    draws: usize,
    rejected: usize,
    unreachable: usize,
    mean: f64,
    sd: f64,
    ks: f64,
    grid_mass: f64,
}

fn simulate(cfg: &RunConfig, dir: &Path, kind: DensityKind, count: usize) -> CliResult<Outcome> {
    let j = cfg.joint_inputs()?;
    let mut out = Outcome::default();
    let seed = cfg.seed();
    let sim = montecarlo::simulate(kind, &j, count, seed)?;
    let tag = match kind {
        DensityKind::SolutionAtPeriod(n) => format!("solution_n{n}"),
        DensityKind::SteadyState => "steady".to_owned(),
        DensityKind::HittingTime(x) => format!("hitting_xhat{x}"),
    };
    let path = dir.join(format!("samples_{tag}.csv"));
    sim.write_csv(create(&path)?).map_err(|source| CliError::File { path: path.clone(), source })?;
    out.files.push(path);

    let grid = grid_for(kind, &j, cfg)?;
    out.check_grid(&grid, if matches!(kind, DensityKind::HittingTime(_)) { HITTING_MASS_TOLERANCE } else { MASS_TOLERANCE });
    let ks = montecarlo::ks_distance(&sim, &grid);
    println!(
        "{kind}: {} samples (seed {seed}, {} rejected, {} unreachable), mean {:.6}, sd {:.6}, KS {:.5}",
        sim.count,
        sim.rejected,
        sim.unreachable,
        sim.mean(),
        sim.sd(),
        ks
    );
    let report = SimulationReport {
        kind,
        count: sim.count,
        seed,
        draws: sim.draws,
        rejected: sim.rejected,
        unreachable: sim.unreachable,
        mean: sim.mean(),
        sd: sim.sd(),
        ks,
        grid_mass: grid.mass,
    };
    write_json(&mut out, dir.join(format!("simulation_{tag}.json")), &report)?;
    Ok(out)
}
