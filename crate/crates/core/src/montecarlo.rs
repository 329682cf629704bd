//! Pathwise simulation of the random model, used as an independent check of
//! the transformed densities.
//!
//! Draws are generated in fixed-size chunks; chunk `i` uses the ChaCha8
//! stream `i` of the generator seeded with `seed`, and chunks are
//! concatenated in index order, so the output depends only on the seed, the
//! count and the inputs, never on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::JointInputs;
use crate::grid::{DensityGrid, DensityKind, GridSpec};
use crate::model::{closed_form_scaled, hitting_period, Decay};
use crate::numerics::QuadratureConfig;
use crate::{Error, Result};

const CHUNK: usize = 16_384;
const CHUNKS_PER_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub kind: DensityKind,
    /// In generation order.
    pub samples: Vec<f64>,
    pub seed: u64,
    /// Number of samples kept.
    pub count: usize,
    /// Valid input draws consumed.
    pub draws: usize,
    /// Draws discarded because `a <= 1`, `b <= 0` or `c <= 0`.
    pub rejected: usize,
    /// Valid draws for which the level is never reached (hitting time only).
    pub unreachable: usize,
}

impl SimulationResult {
    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Sample standard deviation (divisor `count - 1`).
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.samples.iter().map(|x| (x - m) * (x - m)).sum();
        (ss / (self.samples.len().max(2) - 1) as f64).sqrt()
    }

    /// Single-column CSV with header `sample`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample"])?;
        for x in &self.samples {
            w.write_record([x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one input draw; `None` inside `Valid` marks an unreachable level.
enum Draw {
    Rejected,
    Valid(Option<f64>),
}

/// Draws until `valid_draws` valid input triples have been seen and applies
/// `map` to each; returns the outcomes in draw order and the number of
/// rejected draws before the last valid one.
fn run<F>(j: &JointInputs, valid_draws: usize, seed: u64, map: F) -> Result<(Vec<Option<f64>>, usize)>
where
    F: Fn(f64, f64, f64) -> Option<f64> + Sync,
{
    if valid_draws == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut outcomes = Vec::with_capacity(valid_draws);
    let mut rejected = 0;
    let mut next = 0_u64;
    while outcomes.len() < valid_draws {
        let wanted = (valid_draws - outcomes.len()).div_ceil(CHUNK).clamp(1, CHUNKS_PER_BATCH) as u64;
        let batch: Vec<Vec<Draw>> = (next..next + wanted)
            .into_par_iter()
            .map(|idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(idx);
                (0..CHUNK)
                    .map(|_| {
                        let (c, a, b) = j.sample(&mut rng);
                        if a > 1.0 && b > 0.0 && c > 0.0 {
                            Draw::Valid(map(c, a, b))
                        } else {
                            Draw::Rejected
                        }
                    })
                    .collect()
            })
            .collect();
        next += wanted;
        for draw in batch.into_iter().flatten() {
            if outcomes.len() >= valid_draws {
                break;
            }
            match draw {
                Draw::Rejected => rejected += 1,
                Draw::Valid(v) => outcomes.push(v),
            }
        }
        if rejected > outcomes.len() {
            return Err(Error::InconsistentInputs(format!(
                "{rejected} of {} draws violate a > 1, b > 0, c > 0",
                rejected + outcomes.len()
            )));
        }
    }
    Ok((outcomes, rejected))
}

fn collect(
    kind: DensityKind,
    outcomes: Vec<Option<f64>>,
    rejected: usize,
    seed: u64,
) -> SimulationResult {
    let draws = outcomes.len();
    let samples: Vec<f64> = outcomes.into_iter().flatten().collect();
    SimulationResult {
        kind,
        count: samples.len(),
        unreachable: draws - samples.len(),
        samples,
        seed,
        draws,
        rejected,
    }
}

/// `count` samples of `X_n`.
pub fn simulate_solution(j: &JointInputs, n: u32, count: usize, seed: u64) -> Result<SimulationResult> {
    let (out, rejected) = run(j, count, seed, |c, a, b| {
        Some(closed_form_scaled(c, a, b, &Decay::new(a, n as f64)))
    })?;
    Ok(collect(DensityKind::SolutionAtPeriod(n), out, rejected, seed))
}

/// `count` samples of `(A - 1) / B`.
pub fn simulate_steady_state(j: &JointInputs, count: usize, seed: u64) -> Result<SimulationResult> {
    let (out, rejected) = run(j, count, seed, |_, a, b| Some((a - 1.0) / b))?;
    Ok(collect(DensityKind::SteadyState, out, rejected, seed))
}

/// Hitting periods of `x̂` over `count` valid draws. A draw contributes when
/// `x̂` and `c` both lie below the steady state; the period is negative when
/// the trajectory started above `x̂`. Other draws are counted as unreachable.
pub fn simulate_hitting_time(j: &JointInputs, x_hat: f64, count: usize, seed: u64) -> Result<SimulationResult> {
    if !(x_hat > 0.0 && x_hat.is_finite()) {
        return Err(Error::invalid(format!("x_hat must be positive, got {x_hat}")));
    }
    let (out, rejected) = run(j, count, seed, |c, a, b| {
        let s = (a - 1.0) / b;
        if !(x_hat < s && c < s) {
            return None;
        }
        let p = crate::model::PielouPoint { c, a, b };
        hitting_period(&p, x_hat).filter(|t| t.is_finite())
    })?;
    let r = collect(DensityKind::HittingTime(x_hat), out, rejected, seed);
    if r.samples.is_empty() {
        return Err(Error::domain(format!("level unreachable: no draw reaches x_hat = {x_hat}")));
    }
    Ok(r)
}

pub fn simulate(kind: DensityKind, j: &JointInputs, count: usize, seed: u64) -> Result<SimulationResult> {
    match kind {
        DensityKind::SolutionAtPeriod(n) => simulate_solution(j, n, count, seed),
        DensityKind::SteadyState => simulate_steady_state(j, count, seed),
        DensityKind::HittingTime(x) => simulate_hitting_time(j, x, count, seed),
    }
}

/// Largest gap between the empirical CDF of the samples and the CDF implied
/// by the grid.
///
/// The grid CDF is divided by the grid mass, so the comparison is between
/// conditional laws; this matters for the hitting time, whose density only
/// covers the draws that reach the level.
pub fn ks_distance(result: &SimulationResult, grid: &DensityGrid) -> f64 {
    let s = result.sorted();
    if s.is_empty() || !(grid.mass > 0.0) {
        return 1.0;
    }
    let m = s.len() as f64;
    let cdf = grid.cdf_at_sorted(&s);
    let mut d: f64 = 0.0;
    for (i, g) in cdf.iter().enumerate() {
        let g = g / grid.mass;
        d = d.max((i as f64 + 1.0) / m - g).max(g - i as f64 / m);
    }
    d
}

/// Gaussian kernel estimate of the sample density on `spec`, with
/// Silverman's rule-of-thumb bandwidth.
pub fn kernel_density_grid(result: &SimulationResult, spec: &GridSpec) -> Result<DensityGrid> {
    spec.validate()?;
    let s = result.sorted();
    let m = s.len();
    if m < 2 {
        return Err(Error::invalid("kernel estimate needs at least 2 samples"));
    }
    let q = |p: f64| s[((p * m as f64) as usize).min(m - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = result.sd().min(iqr / 1.34);
    let h = 0.9 * spread.max(f64::MIN_POSITIVE) * (m as f64).powf(-0.2);
    let norm = 1.0 / (m as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let xs = spec.abscissae();
    let values = xs
        .par_iter()
        .map(|&x| {
            // only samples within 8 bandwidths matter
            let lo = s.partition_point(|&v| v < x - 8.0 * h);
            let hi = s.partition_point(|&v| v <= x + 8.0 * h);
            s[lo..hi].iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
        })
        .collect();
    DensityGrid::new(result.kind, xs, values, true, 0.0, QuadratureConfig::default())
}
