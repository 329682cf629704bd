//! Densities of the solution, the steady state and the hitting time obtained
//! by transforming the joint input density and marginalizing numerically.
//!
//! Every density is a double integral over two of the three inputs. The
//! integration limits are not the raw input box: for each value of the outer
//! variable the inner window is restricted analytically to the points whose
//! recovered coordinate lands inside the box, so the integrand has no large
//! zero plateaus for the adaptive rule to chase.

use rayon::prelude::*;

use crate::distributions::{InputBox, JointDensity, JointInputs};
use crate::grid::{DensityGrid, DensityKind, GridSpec};
use crate::model::{inverse_b_scaled, inverse_c_scaled, inverse_hitting_scaled, Decay};
use crate::montecarlo;
use crate::numerics::{adaptive, integrate_iterated, integrate_nested, Estimate, QuadratureConfig};
use crate::{Error, Result};

const OUTER_PANELS: usize = 8;
const SCAN_POINTS: usize = 129;
/// Above this ratio the inverse in `c` loses too many digits to cancellation
/// and the slice is integrated over `c` instead of `b`.
const CONDITION_LIMIT: f64 = 1e6;

const RANGE_SAMPLES: usize = 200_000;
const RANGE_SEED: u64 = 0x5eed;
const RANGE_QUANTILES: (f64, f64) = (1e-4, 0.9999);

fn input_box<J: JointDensity + ?Sized>(j: &J, cfg: &QuadratureConfig) -> Option<InputBox> {
    let bx = j.effective_box(cfg.gaussian_truncation_k).constrained();
    (!bx.is_empty()).then_some(bx)
}

/// Hull of the points of `[lo, hi]` where `feasible` holds, located on a
/// uniform scan and refined by bisection. The returned ends lie just outside
/// the feasible set so nothing is cut off.
fn feasible_hull(lo: f64, hi: f64, feasible: impl Fn(f64) -> bool) -> Option<(f64, f64)> {
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let pts: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i + 1 == SCAN_POINTS { hi } else { lo + step * i as f64 })
        .collect();
    let flags: Vec<bool> = pts.iter().map(|&a| feasible(a)).collect();
    let first = flags.iter().position(|&f| f)?;
    let last = flags.iter().rposition(|&f| f)?;
    let boundary = |mut out: f64, mut inside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (out + inside);
            if mid == out || mid == inside {
                break;
            }
            if feasible(mid) {
                inside = mid;
            } else {
                out = mid;
            }
        }
        out
    };
    let left = if first == 0 { lo } else { boundary(pts[first - 1], pts[first]) };
    let right = if last + 1 == SCAN_POINTS { hi } else { boundary(pts[last + 1], pts[last]) };
    (right > left).then_some((left, right))
}

fn nonempty(lo: f64, hi: f64) -> Option<(f64, f64)> {
    (hi > lo).then_some((lo, hi))
}

/// How one `a`-slice is integrated.
#[derive(Debug, Clone, Copy)]
enum Slice {
    /// over `b` in the given window, `c` recovered from `(x, a, b)`
    OverB(f64, f64),
    /// over `c` in the given window, `b` recovered from `(x, a, c)`
    OverC(f64, f64),
}

/// `b` at which the trajectory from `c` sits at `x` after the decay `d`.
fn b_from_c(x: f64, am1: f64, c: f64, d: &Decay) -> f64 {
    am1 * (1.0 / x - d.q / c) / d.one_minus_q
}

/// `c` at which the trajectory with crowding `b` sits at `x` after the decay
/// `d`; infinite when no positive `c` exists.
fn c_from_b(x: f64, am1: f64, b: f64, d: &Decay) -> f64 {
    let r = 1.0 / x - b * d.one_minus_q / am1;
    if r > 0.0 {
        d.q / r
    } else {
        f64::INFINITY
    }
}

/// Window in `b` (restricted to `b < b_max`) whose recovered `c` lies in the box.
fn window_over_b(x: f64, am1: f64, d: &Decay, bx: &InputBox, b_max: f64) -> Option<(f64, f64)> {
    let b_hi = bx.b.1.min(b_max);
    if d.one_minus_q == 0.0 {
        // period zero: c = x whatever b is
        return if bx.c.0 <= x && x <= bx.c.1 { nonempty(bx.b.0, b_hi) } else { None };
    }
    let (u, v) = (b_from_c(x, am1, bx.c.0, d), b_from_c(x, am1, bx.c.1, d));
    nonempty(bx.b.0.max(u.min(v)), b_hi.min(u.max(v)))
}

fn window_over_c(x: f64, am1: f64, d: &Decay, bx: &InputBox, b_max: f64) -> Option<(f64, f64)> {
    let b_hi = bx.b.1.min(b_max);
    if !(b_hi > bx.b.0) {
        return None;
    }
    let (u, v) = (c_from_b(x, am1, bx.b.0, d), c_from_b(x, am1, b_hi, d));
    nonempty(bx.c.0.max(u.min(v)), bx.c.1.min(u.max(v)))
}

fn ill_conditioned(x: f64, d: &Decay, bx: &InputBox) -> bool {
    d.one_minus_q > 0.0 && bx.c.1 / (x * d.q) > CONDITION_LIMIT
}

/// Outer integral over `a` of slice integrals.
fn over_a<P, I>(bx: &InputBox, cfg: &QuadratureConfig, plan: P, slice: I) -> Estimate
where
    P: Fn(f64) -> Option<Slice>,
    I: Fn(f64, Slice, &QuadratureConfig) -> Estimate,
{
    let Some(range) = feasible_hull(bx.a.0, bx.a.1, |a| plan(a).is_some()) else {
        return Estimate::ZERO;
    };
    integrate_nested(range, OUTER_PANELS, cfg, |a, inner| match plan(a) {
        Some(s) => slice(a, s, inner),
        None => Estimate::ZERO,
    })
}

/// Density of `X_n` at `x`, marginalizing over `(a, b)` with `c` recovered
/// from the closed form.
///
/// Slices where that inverse is ill-conditioned (large `n`, so `a^{-n}` is
/// tiny) are integrated over `c` instead, which is the same integral after a
/// change of variables. At `n = 0` the density of `C` is returned directly
/// when the joint law provides it.
pub fn solution_pdf<J: JointDensity + ?Sized>(j: &J, n: u32, x: f64, cfg: &QuadratureConfig) -> Estimate {
    if !(x > 0.0 && x.is_finite()) {
        return Estimate::ZERO;
    }
    let Some(bx) = input_box(j, cfg) else {
        return Estimate::ZERO;
    };
    if n == 0 {
        return period_zero(j, x, &bx, cfg);
    }
    let n = n as f64;
    let plan = |a: f64| {
        let d = Decay::new(a, n);
        let am1 = a - 1.0;
        if ill_conditioned(x, &d, &bx) {
            window_over_c(x, am1, &d, &bx, f64::INFINITY).map(|(l, h)| Slice::OverC(l, h))
        } else {
            window_over_b(x, am1, &d, &bx, f64::INFINITY).map(|(l, h)| Slice::OverB(l, h))
        }
    };
    over_a(&bx, cfg, plan, |a, s, inner| solution_slice(j, x, a, n, s, inner))
}

/// Density of `X_n` at `x` through the second marginalization, over `(a, c)`
/// with `b` recovered from the closed form. Undefined at `n = 0`.
pub fn solution_pdf_alt<J: JointDensity + ?Sized>(
    j: &J,
    n: u32,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::domain("the solution does not depend on b at period 0"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Ok(Estimate::ZERO);
    }
    let Some(bx) = input_box(j, cfg) else {
        return Ok(Estimate::ZERO);
    };
    let n = n as f64;
    let plan = |a: f64| {
        let d = Decay::new(a, n);
        window_over_c(x, a - 1.0, &d, &bx, f64::INFINITY).map(|(l, h)| Slice::OverC(l, h))
    };
    Ok(over_a(&bx, cfg, plan, |a, s, inner| solution_slice(j, x, a, n, s, inner)))
}

fn solution_slice<J: JointDensity + ?Sized>(
    j: &J,
    x: f64,
    a: f64,
    n: f64,
    slice: Slice,
    cfg: &QuadratureConfig,
) -> Estimate {
    let d = Decay::new(a, n);
    match slice {
        Slice::OverB(lo, hi) => adaptive(
            &|b| match inverse_c_scaled(x, a, b, &d) {
                Some(m) => j.joint_density(m.value, a, b) * m.jacobian_abs,
                None => 0.0,
            },
            lo,
            hi,
            1,
            cfg,
        ),
        Slice::OverC(lo, hi) => adaptive(
            &|c| match inverse_b_scaled(x, a, c, &d) {
                Some(m) => j.joint_density(c, a, m.value) * m.jacobian_abs,
                None => 0.0,
            },
            lo,
            hi,
            1,
            cfg,
        ),
    }
}

fn period_zero<J: JointDensity + ?Sized>(j: &J, x: f64, bx: &InputBox, cfg: &QuadratureConfig) -> Estimate {
    if let Some(v) = j.c_marginal(x) {
        return Estimate { value: v, ..Estimate::ZERO };
    }
    if !(bx.c.0 <= x && x <= bx.c.1) {
        return Estimate::ZERO;
    }
    integrate_iterated(|a, b| j.joint_density(x, a, b), bx.a, |_| Some(bx.b), OUTER_PANELS, cfg)
}

/// Density of the steady state `(A - 1) / B` at `x`: `a = x b + 1` is
/// recovered and the integral runs over `(b, c)` with Jacobian `b`.
pub fn steady_state_pdf<J: JointDensity + ?Sized>(j: &J, x: f64, cfg: &QuadratureConfig) -> Estimate {
    if !(x > 0.0 && x.is_finite()) {
        return Estimate::ZERO;
    }
    let Some(bx) = input_box(j, cfg) else {
        return Estimate::ZERO;
    };
    let b_lo = bx.b.0.max((bx.a.0 - 1.0) / x);
    let b_hi = bx.b.1.min((bx.a.1 - 1.0) / x);
    if !(b_hi > b_lo) {
        return Estimate::ZERO;
    }
    integrate_iterated(
        |b, c| j.joint_density(c, x * b + 1.0, b) * b,
        (b_lo, b_hi),
        |_| Some(bx.c),
        OUTER_PANELS,
        cfg,
    )
}

/// Density at the (real) period `n` of the time at which the trajectory
/// reaches `x̂`.
///
/// Only inputs with `x̂` below the steady state contribute, and the recovered
/// initial size then lies below the steady state as well; `n < 0` collects
/// the trajectories that started above `x̂`. The density therefore integrates
/// to `P[x̂ < (A-1)/B, C < (A-1)/B]`, not to one.
pub fn hitting_time_pdf<J: JointDensity + ?Sized>(j: &J, x_hat: f64, n: f64, cfg: &QuadratureConfig) -> Estimate {
    if !(x_hat > 0.0 && x_hat.is_finite() && n.is_finite()) {
        return Estimate::ZERO;
    }
    let Some(bx) = input_box(j, cfg) else {
        return Estimate::ZERO;
    };
    let plan = |a: f64| {
        let d = Decay::new(a, n);
        let am1 = a - 1.0;
        let b_max = am1 / x_hat;
        if ill_conditioned(x_hat, &d, &bx) {
            window_over_c(x_hat, am1, &d, &bx, b_max).map(|(l, h)| Slice::OverC(l, h))
        } else {
            window_over_b(x_hat, am1, &d, &bx, b_max).map(|(l, h)| Slice::OverB(l, h))
        }
    };
    over_a(&bx, cfg, plan, |a, s, inner| {
        let d = Decay::new(a, n);
        let am1 = a - 1.0;
        match s {
            Slice::OverB(lo, hi) => adaptive(
                &|b| match inverse_hitting_scaled(x_hat, a, b, &d) {
                    Some(m) => j.joint_density(m.value, a, b) * m.jacobian_abs,
                    None => 0.0,
                },
                lo,
                hi,
                1,
                inner,
            ),
            Slice::OverC(lo, hi) => adaptive(
                &|c| {
                    let b = b_from_c(x_hat, am1, c, &d);
                    let gap = am1 - x_hat * b;
                    if !(b > 0.0 && gap > 0.0) {
                        return 0.0;
                    }
                    // |∂b/∂n| at fixed (a, c)
                    let jac = d.ln_a * gap / (x_hat * d.one_minus_q.abs());
                    j.joint_density(c, a, b) * jac
                },
                lo,
                hi,
                1,
                inner,
            ),
        }
    })
}

/// Density of `kind` at one abscissa.
pub fn density_at<J: JointDensity + ?Sized>(kind: DensityKind, j: &J, t: f64, cfg: &QuadratureConfig) -> Estimate {
    match kind {
        DensityKind::SolutionAtPeriod(n) => solution_pdf(j, n, t, cfg),
        DensityKind::SteadyState => steady_state_pdf(j, t, cfg),
        DensityKind::HittingTime(x_hat) => hitting_time_pdf(j, x_hat, t, cfg),
    }
}

/// Evaluates the density on every abscissa of `spec` (in parallel). The
/// grid's mass is its trapezoidal integral; values are not rescaled.
pub fn tabulate<J: JointDensity + ?Sized>(
    kind: DensityKind,
    j: &J,
    cfg: &QuadratureConfig,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    cfg.validate()?;
    spec.validate()?;
    if let DensityKind::HittingTime(x_hat) = kind {
        if !(x_hat > 0.0 && x_hat.is_finite()) {
            return Err(Error::invalid(format!("x_hat must be positive, got {x_hat}")));
        }
    }
    let xs = spec.abscissae();
    let ests: Vec<Estimate> = xs.par_iter().map(|&t| density_at(kind, j, t, cfg)).collect();
    let converged = ests.iter().all(|e| e.converged);
    let max_error = ests.iter().map(|e| e.error).fold(0.0, f64::max);
    let values = ests.iter().map(|e| e.value.max(0.0)).collect();
    DensityGrid::new(kind, xs, values, converged, max_error, *cfg)
}

/// Abscissa range from the `1e-4` and `0.9999` quantiles of a fixed-seed
/// simulation. Wide positive ranges (ratio above 20) get geometric spacing
/// stretched by a factor 1.1 at each end; otherwise the range is padded by
/// 10% of its width on each side (never below zero for positive variables).
pub fn default_grid_spec(kind: DensityKind, j: &JointInputs, points: usize) -> Result<GridSpec> {
    let sim = montecarlo::simulate(kind, j, RANGE_SAMPLES, RANGE_SEED)?;
    let mut s = sim.samples;
    s.sort_by(f64::total_cmp);
    let pick = |p: f64| s[((p * s.len() as f64) as usize).min(s.len() - 1)];
    let (mut lo, mut hi) = (pick(RANGE_QUANTILES.0), pick(RANGE_QUANTILES.1));
    if !(hi > lo) {
        let pad = (lo.abs() * 1e-3).max(1e-3);
        lo -= pad;
        hi += pad;
    }
    let spec = if lo > 0.0 && hi / lo > 20.0 {
        GridSpec::log(lo / 1.1, hi * 1.1, points)
    } else {
        let w = hi - lo;
        let mut l = lo - 0.1 * w;
        if kind.is_positive() {
            l = l.max(0.0);
        }
        GridSpec::linear(l, hi + 0.1 * w, points)
    };
    spec.validate()?;
    Ok(spec)
}
