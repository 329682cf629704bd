//! Least-squares calibration of Gaussian inputs to an observed series.
//!
//! The objective only involves `E[X_n]`, so the three means are well
//! identified while the standard deviations are weakly constrained: they
//! move the expectation only through second-order effects.

mod data;
pub mod nelder_mead;

pub use data::DataSeries;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, JointInputs};
use crate::model::{solve_closed_form, PielouPoint};
use crate::numerics::QuadratureConfig;
use crate::statistics::input_space_moments;
use crate::{Error, Result};

/// Returned by [`objective`] for trial parameters that cannot be evaluated.
pub const PENALTY: f64 = 1e6;

/// Validity mass below which a trial point is penalized.
const MIN_VALIDITY: f64 = 0.5;

/// The search penalizes standard deviations below this fraction of their
/// mean: the objective is flat there, and the near-degenerate input law
/// makes the quadrature needlessly expensive.
const MIN_REL_SIGMA: f64 = 1e-6;

/// Means and standard deviations of `A ~ N(μ_A, σ_A)`, `B ~ N(μ_B, σ_B)`,
/// `C ~ N(μ_C, σ_C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("mu_a", self.mu_a),
            ("mu_b", self.mu_b),
            ("mu_c", self.mu_c),
            ("sigma_a", self.sigma_a),
            ("sigma_b", self.sigma_b),
            ("sigma_c", self.sigma_c),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        for (name, v) in &all[3..] {
            if !(*v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> Result<JointInputs> {
        self.validate()?;
        Ok(JointInputs::new(
            DistributionSpec::gaussian(self.mu_c, self.sigma_c)?,
            DistributionSpec::gaussian(self.mu_a, self.sigma_a)?,
            DistributionSpec::gaussian(self.mu_b, self.sigma_b)?,
        ))
    }

    /// Optimizer coordinates: the means, then the log standard deviations.
    fn to_vec(self) -> [f64; 6] {
        [self.mu_a, self.mu_b, self.mu_c, self.sigma_a.ln(), self.sigma_b.ln(), self.sigma_c.ln()]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self { mu_a: v[0], mu_b: v[1], mu_c: v[2], sigma_a: v[3].exp(), sigma_b: v[4].exp(), sigma_c: v[5].exp() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_evaluations: usize,
    /// Relative spread of the simplex values at which a run stops.
    pub tolerance: f64,
    /// Fresh simplices started from the best point after the first run.
    pub restarts: usize,
    /// Quadrature relative tolerance used while optimizing.
    pub search_rel_tol: f64,
    /// Gaussian truncation used while optimizing. The few missing parts per
    /// million only shift the search objective; the report uses `quadrature`.
    pub search_truncation_k: f64,
    /// Tolerances of the final report.
    pub quadrature: QuadratureConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            tolerance: 1e-6,
            restarts: 2,
            search_rel_tol: 1e-3,
            search_truncation_k: 5.0,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ModelParams,
    /// Objective at `params` with the final-report tolerances.
    pub sse: f64,
    /// Objective at the starting point with the same tolerances.
    pub initial_sse: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Every improvement of the best point, in order.
    pub trace: Vec<(ModelParams, f64)>,
}

/// Model expectations `E[X_n]` at the data periods, or `None` when the
/// parameters cannot be evaluated reliably.
pub fn expectations(params: &ModelParams, periods: &[u32], cfg: &QuadratureConfig) -> Option<Vec<f64>> {
    let j = params.inputs().ok()?;
    if j.validity_mass() < MIN_VALIDITY {
        return None;
    }
    let ests = input_space_moments(&j, periods, 1, cfg).ok()?;
    ests.iter().all(|e| e.converged && e.value.is_finite()).then(|| ests.iter().map(|e| e.value).collect())
}

/// `Σ (x_n - E[X_n])²` over the data, or [`PENALTY`] when the parameters are
/// invalid, the input law puts less than half its mass on valid inputs, or
/// a quadrature fails to converge.
pub fn objective(params: &ModelParams, data: &DataSeries, cfg: &QuadratureConfig) -> f64 {
    match expectations(params, &data.periods, cfg) {
        Some(means) => data.values.iter().zip(means).map(|(x, m)| (x - m) * (x - m)).sum(),
        None => PENALTY,
    }
}

/// Starting point from the linearization `z_{n+1} = z_n / a + b / a` of the
/// recursion in `z = 1/x`, fitted by ordinary least squares over consecutive
/// periods; `c` is the first observation and the standard deviations are 1%
/// of the means. A degenerate or invalid regression falls back to
/// `a = 1.5`, `b = 0.1`.
pub fn heuristic_initial(data: &DataSeries) -> Result<ModelParams> {
    if data.len() < 3 {
        return Err(Error::invalid(format!("heuristic start needs at least 3 rows, got {}", data.len())));
    }
    let pairs: Vec<(f64, f64)> = data
        .periods
        .windows(2)
        .zip(data.values.windows(2))
        .filter(|(p, _)| p[1] == p[0] + 1)
        .map(|(_, v)| (1.0 / v[0], 1.0 / v[1]))
        .collect();
    let c = data.values[0];
    let (mut a, mut b) = (1.5, 0.1);
    if pairs.len() >= 2 {
        let k = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 1e-14 * mx * mx * k {
            let slope = sxy / sxx;
            let intercept = my - slope * mx;
            let (ah, bh) = (1.0 / slope, intercept / slope);
            if ah > 1.0 && bh > 0.0 && ah.is_finite() && bh.is_finite() {
                a = ah;
                b = bh;
            }
        }
    }
    Ok(ModelParams { mu_a: a, mu_b: b, mu_c: c, sigma_a: 0.01 * a, sigma_b: 0.01 * b, sigma_c: 0.01 * c })
}

/// Squared error of the deterministic trajectory at the means, the
/// zero-variance limit of [`objective`].
fn deterministic_sse(mu: &[f64], data: &DataSeries) -> f64 {
    let Ok(p) = PielouPoint::new(mu[2], mu[0], mu[1]) else {
        return f64::INFINITY;
    };
    data.rows().map(|(n, x)| (x - solve_closed_form(&p, n)).powi(2)).sum()
}

/// Nelder–Mead over the means and log standard deviations, with restarts.
///
/// The means are first moved to the minimum of the zero-variance limit of
/// the objective, which costs no quadrature; that point replaces the start
/// when it scores better under the full objective. This keeps the expensive
/// search away from the slow drift along the `(a - 1) / b` ridge.
///
/// The search runs with the looser `search_rel_tol`; the returned SSE is
/// recomputed at the report tolerances, and the starting point is returned
/// instead whenever it scores at least as well there.
pub fn fit(data: &DataSeries, initial: &ModelParams, options: &FitOptions) -> Result<FitResult> {
    initial.validate()?;
    options.quadrature.validate()?;
    if !(options.tolerance >= 0.0) || !(options.search_rel_tol > 0.0) {
        return Err(Error::invalid("fit tolerances must be positive"));
    }
    let mut search = options
        .quadrature
        .with_tolerances(options.search_rel_tol.max(options.quadrature.rel_tol), options.quadrature.abs_tol);
    search.gaussian_truncation_k = options.search_truncation_k;
    search.validate()?;
    let mut trace: Vec<(ModelParams, f64)> = Vec::new();
    let mut best_f = f64::INFINITY;
    let mut f = |v: &[f64]| {
        let p = ModelParams::from_slice(v);
        let floor = [p.sigma_a / p.mu_a, p.sigma_b / p.mu_b, p.sigma_c / p.mu_c];
        let value = if floor.iter().any(|r| !(r.abs() >= MIN_REL_SIGMA)) {
            PENALTY
        } else {
            objective(&p, data, &search)
        };
        if value < best_f {
            best_f = value;
            trace.push((p, value));
        }
        value
    };

    let mut x = initial.to_vec().to_vec();
    let mut evaluations = 0;
    let mu0 = &x[..3];
    let steps: Vec<f64> = mu0.iter().map(|v| 0.05 * v.abs().max(1e-3)).collect();
    let warm = nelder_mead::minimize(&mut |mu: &[f64]| deterministic_sse(mu, data), mu0, &steps, 1e-12, 5000);
    let mut fx = f(&x);
    evaluations += 1;
    if warm.fx.is_finite() {
        let mut y = x.clone();
        y[..3].copy_from_slice(&warm.x);
        let fy = f(&y);
        evaluations += 1;
        if fy < fx {
            x = y;
            fx = fy;
        }
    }
    let mut converged = false;
    for round in 0..=options.restarts {
        let budget = options.max_evaluations.saturating_sub(evaluations);
        if budget == 0 {
            break;
        }
        let steps: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| if i < 3 { 0.05 * v.abs().max(1e-3) } else { 0.4 })
            .collect();
        let m = nelder_mead::minimize(&mut f, &x, &steps, options.tolerance, budget);
        evaluations += m.evaluations;
        let improved = m.fx < fx && (fx - m.fx) > options.tolerance * m.fx.abs();
        converged = m.converged;
        if m.fx <= fx {
            x = m.x;
            fx = m.fx;
        }
        if round > 0 && !improved {
            break;
        }
        if !m.converged {
            break;
        }
    }

    let initial_sse = objective(initial, data, &options.quadrature);
    let found = ModelParams::from_slice(&x);
    let found_sse = objective(&found, data, &options.quadrature);
    let (params, sse) = if found_sse <= initial_sse { (found, found_sse) } else { (*initial, initial_sse) };
    Ok(FitResult { params, sse, initial_sse, evaluations, converged, trace })
}
