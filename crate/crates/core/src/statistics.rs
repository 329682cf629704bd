//! Moments, interval probabilities and confidence intervals derived from the
//! transformed densities.

use serde::Serialize;

use crate::distributions::JointDensity;
use crate::grid::{DensityGrid, DensityKind};
use crate::model::{closed_form_scaled, Decay};
use crate::numerics::{find_root, integrate_1d_multi, QuadratureConfig};
use crate::rvt::{solution_pdf, steady_state_pdf};
use crate::{Error, Result};

/// Largest tolerated `|mass - 1|` for quantile-based statistics.
pub const MASS_TOLERANCE: f64 = 5e-3;

/// The log-range is cut into pieces of at most this width (in `ln x`), and
/// at most `MAX_PIECES` of them, before adaptive refinement.
const PIECE_WIDTH: f64 = 0.5;
const MAX_PIECES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub kind: DensityKind,
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    /// `E[X^k]` for `k = 0..=max_k`; the entry for `k = 0` is the mass.
    pub raw: Vec<f64>,
    pub converged: bool,
}

impl MomentReport {
    pub fn mass(&self) -> f64 {
        self.raw[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub kind: DensityKind,
    pub alpha: f64,
    pub z1: f64,
    pub z2: f64,
    pub achieved_mass: f64,
}

/// Raw moments of `X_n` up to order `max_k`.
///
/// The integral `∫ x^k f(x) dx` runs over the exact range of `X_n` on the
/// effective input box (`X_n` increases with `c` and `a` and decreases with
/// `b`), in the variable `ln x`, with the density evaluated pointwise. This
/// avoids the truncation error a finite tabulation range would add to the
/// higher moments of long-tailed laws.
pub fn moments<J: JointDensity + ?Sized>(j: &J, n: u32, cfg: &QuadratureConfig, max_k: u32) -> Result<MomentReport> {
    cfg.validate()?;
    let bx = j.effective_box(cfg.gaussian_truncation_k).constrained();
    let d_lo = Decay::new(bx.a.0, n as f64);
    let d_hi = Decay::new(bx.a.1, n as f64);
    let lo = closed_form_scaled(bx.c.0, bx.a.0, bx.b.1, &d_lo);
    let hi = closed_form_scaled(bx.c.1, bx.a.1, bx.b.0, &d_hi);
    log_moments(DensityKind::SolutionAtPeriod(n), lo, hi, max_k, cfg, |x| {
        solution_pdf(j, n, x, &pointwise(cfg, x, max_k))
    })
}

/// Raw moments of the steady state `(A - 1) / B` up to order `max_k`.
///
/// Unlike `X_n`, the steady state is unbounded when `B` has mass near 0, and
/// its tail can be too heavy for some moments to exist (for `B ~ Beta(α, ·)`
/// the density falls like `x^{-α-1}`, so `E[X^α]` diverges). A moment whose
/// integrand `x^{k+1} f(x)` in `ln x` decays slower than `x^{-1/4}` across
/// the last decades of the range is reported as `+∞`: its truncated integral
/// would only measure how far the input box was cut.
pub fn steady_state_moments<J: JointDensity + ?Sized>(
    j: &J,
    cfg: &QuadratureConfig,
    max_k: u32,
) -> Result<MomentReport> {
    cfg.validate()?;
    let bx = j.effective_box(cfg.gaussian_truncation_k).constrained();
    let lo = (bx.a.0 - 1.0) / bx.b.1;
    let hi = (bx.a.1 - 1.0) / bx.b.0;
    let density = |x: f64| steady_state_pdf(j, x, &pointwise(cfg, x, max_k));
    let mut r = log_moments(DensityKind::SteadyState, lo, hi, max_k, cfg, density)?;
    if hi / lo > TAIL_SPAN.exp() {
        let (x1, x2) = (hi * (-0.5 * TAIL_SPAN).exp(), hi * (-TAIL_SPAN).exp());
        let (f1, f2) = (density(x1).value, density(x2).value);
        for k in 1..=max_k as usize {
            let (g1, g2) = (x1.powi(k as i32 + 1) * f1, x2.powi(k as i32 + 1) * f2);
            if g1 > 0.0 && g2 > 0.0 && g1 / g2 > (-0.125 * TAIL_SPAN).exp() {
                r.raw[k] = f64::INFINITY;
            }
        }
        r.mean = r.raw[1];
        if r.raw.len() > 2 && !(r.raw[1].is_finite() && r.raw[2].is_finite()) {
            r.variance = f64::INFINITY;
            r.sd = f64::INFINITY;
        }
    }
    Ok(r)
}

/// Width in `ln x` of the upper range probed for divergent steady-state moments.
const TAIL_SPAN: f64 = 8.0;

/// `E[X_n^k]` for several periods at once, integrated directly against the
/// input law: `∫∫∫ x_n(c, a, b)^k f(c, a, b) dc db da`.
///
/// This is the density-based moment before the change of variables
/// `x -> c`. It needs no pointwise density, and one vector-valued nested
/// quadrature serves every period, which makes it the cheap path inside
/// optimization loops.
pub fn input_space_moments<J: JointDensity + ?Sized>(
    j: &J,
    periods: &[u32],
    k: u32,
    cfg: &QuadratureConfig,
) -> Result<Vec<crate::Estimate>> {
    cfg.validate()?;
    let bx = j.effective_box(cfg.gaussian_truncation_k).constrained();
    if bx.is_empty() {
        return Err(Error::domain("input box is empty after applying c > 0, a > 1, b > 0"));
    }
    let m = periods.len();
    let k = k as i32;
    let ok = std::cell::Cell::new(true);
    // inner tolerances halve at each level, as in nested scalar quadrature
    let narrower = |c: &QuadratureConfig, width: f64| c.with_tolerances(0.5 * c.rel_tol, 0.5 * c.abs_tol / width);
    let cfg_b = narrower(cfg, bx.a.1 - bx.a.0);
    let cfg_c = narrower(&cfg_b, bx.b.1 - bx.b.0);
    let values = |ests: Vec<crate::Estimate>| -> Vec<f64> {
        if ests.iter().any(|e| !e.converged) {
            ok.set(false);
        }
        ests.into_iter().map(|e| e.value).collect()
    };
    let outer = integrate_1d_multi(
        |a| {
            let decays: Vec<Decay> = periods.iter().map(|&n| Decay::new(a, n as f64)).collect();
            values(integrate_1d_multi(
                |b| {
                    values(integrate_1d_multi(
                        |c| {
                            let f = j.joint_density(c, a, b);
                            decays.iter().map(|d| if f == 0.0 { 0.0 } else { closed_form_scaled(c, a, b, d).powi(k) * f }).collect()
                        },
                        m,
                        bx.c.0,
                        bx.c.1,
                        &cfg_c,
                    ))
                },
                m,
                bx.b.0,
                bx.b.1,
                &cfg_b,
            ))
        },
        m,
        bx.a.0,
        bx.a.1,
        cfg,
    );
    let inner_ok = ok.get();
    Ok(outer.into_iter().map(|e| crate::Estimate { converged: e.converged && inner_ok, ..e }).collect())
}

/// Tolerances for a density value at `x` that feeds `∫ x^k f(x) x du`: the
/// absolute tolerance shrinks with the weight, so far-tail noise cannot
/// dominate the moment integrand.
fn pointwise(cfg: &QuadratureConfig, x: f64, max_k: u32) -> QuadratureConfig {
    let weight = x.powi(max_k as i32 + 1).max(1.0);
    cfg.with_tolerances(0.5 * cfg.rel_tol, cfg.abs_tol * 1e-6 / weight)
}

fn log_moments<F>(
    kind: DensityKind,
    lo: f64,
    hi: f64,
    max_k: u32,
    cfg: &QuadratureConfig,
    density: F,
) -> Result<MomentReport>
where
    F: Fn(f64) -> crate::Estimate,
{
    if max_k < 1 {
        return Err(Error::invalid("max_k must be at least 1"));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(format!("empty support [{lo}, {hi}] for the moments of {kind}")));
    }
    let m = max_k as usize + 1;
    let (u0, u1) = (lo.ln(), hi.ln());
    let pieces = (((u1 - u0) / PIECE_WIDTH).ceil() as usize).clamp(1, MAX_PIECES);
    let piece = (u1 - u0) / pieces as f64;
    let piece_cfg = cfg.with_tolerances(cfg.rel_tol, cfg.abs_tol / pieces as f64);
    let inner_ok = std::cell::Cell::new(true);
    let mut raw = vec![0.0; m];
    let mut converged = true;
    for p in 0..pieces {
        let a = u0 + piece * p as f64;
        let b = if p + 1 == pieces { u1 } else { a + piece };
        let ests = integrate_1d_multi(
            |u| {
                let x = u.exp();
                let f = density(x);
                if !f.converged {
                    inner_ok.set(false);
                }
                // x^k f(x) dx with dx = x du
                let mut out = Vec::with_capacity(m);
                let mut w = f.value * x;
                for _ in 0..m {
                    out.push(w);
                    w *= x;
                }
                out
            },
            m,
            a,
            b,
            &piece_cfg,
        );
        for (acc, e) in raw.iter_mut().zip(&ests) {
            *acc += e.value;
        }
        converged &= ests.iter().all(|e| e.converged);
    }
    let mean = raw[1];
    let variance = if m > 2 { (raw[2] - mean * mean).max(0.0) } else { f64::NAN };
    Ok(MomentReport {
        kind,
        mean,
        variance,
        sd: variance.sqrt(),
        raw,
        converged: converged && inner_ok.get(),
    })
}

/// `P[lo <= X <= hi]` from the interpolated grid, clipped to `[0, 1]`.
pub fn interval_probability(grid: &DensityGrid, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    (grid.cdf_at(hi) - grid.cdf_at(lo)).clamp(0.0, 1.0)
}

/// Chebyshev's bound `min(1, σ² / λ²)` on `P[|X - μ| >= λ]`.
pub fn chebyshev_bound(report: &MomentReport, lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    (report.variance / (lambda * lambda)).min(1.0)
}

/// Equal-tailed interval: a fraction `α/2` of the grid mass lies below `z1`
/// and the same fraction between `z2` and the upper end of the grid.
pub fn confidence_interval(grid: &DensityGrid, alpha: f64) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if (grid.mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Quality(format!(
            "{} grid has mass {:.6}; quantiles would be unreliable",
            grid.kind, grid.mass
        )));
    }
    let z1 = grid_quantile(grid, 0.5 * alpha * grid.mass)?;
    let z2 = grid_quantile(grid, (1.0 - 0.5 * alpha) * grid.mass)?;
    Ok(ConfidenceInterval {
        kind: grid.kind,
        alpha,
        z1,
        z2,
        achieved_mass: interval_probability(grid, z1, z2),
    })
}

/// Abscissa at which the integrated grid reaches `target`.
pub fn grid_quantile(grid: &DensityGrid, target: f64) -> Result<f64> {
    let (lo, hi) = grid.range();
    let tol = (hi - lo) * 1e-12;
    find_root(|t| grid.cdf_at(t) - target, lo, hi, tol)
}
