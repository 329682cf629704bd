#![allow(clippy::excessive_precision)]

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerances and limits for every adaptive quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the number of intervals held by one adaptive run.
    pub max_subdivisions: usize,
    /// Unbounded (and long-tailed) input laws are cut where the tail mass
    /// drops below `Φ(-k)`; `k = 8` loses less than 1e-15 per tail.
    pub gaussian_truncation_k: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_subdivisions: 200,
            gaussian_truncation_k: 8.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature.rel_tol must be > 0"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid("quadrature.abs_tol must be > 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("quadrature.max_subdivisions must be >= 1"));
        }
        if !(self.gaussian_truncation_k >= 4.0) {
            return Err(Error::invalid("quadrature.gaussian_truncation_k must be >= 4"));
        }
        Ok(())
    }

    /// Same limits with both tolerances replaced.
    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

/// Outcome of an adaptive integration. A non-converged estimate is still the
/// best value found; callers decide whether to reject it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
        converged: true,
        evaluations: 0,
    };
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
// Digits kept as tabulated.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
    }
    combine_15(f(center), &fv1, &fv2, half)
}

/// Kronrod estimate and QUADPACK error estimate from the 15 node values.
fn combine_15(f_center: f64, fv1: &[f64; 7], fv2: &[f64; 7], half: f64) -> (f64, f64) {
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut res_abs = kronrod.abs();
    for j in 0..7 {
        let (f1, f2) = (fv1[j], fv2[j]);
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[lo, hi]`.
///
/// The interval with the largest error estimate is bisected until
/// `error <= max(abs_tol, rel_tol * |value|)` or `max_subdivisions` panels
/// are in use. An empty or reversed interval integrates to zero.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Estimate {
    adaptive(&f, lo, hi, 1, cfg)
}

pub(crate) fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    initial_panels: usize,
    cfg: &QuadratureConfig,
) -> Estimate {
    if !(hi > lo) {
        return Estimate::ZERO;
    }
    let initial_panels = initial_panels.clamp(1, cfg.max_subdivisions.max(1));
    let width = (hi - lo) / initial_panels as f64;
    let mut heap = BinaryHeap::with_capacity(cfg.max_subdivisions + 1);
    let mut evaluations = 0;
    for i in 0..initial_panels {
        let a = lo + width * i as f64;
        let b = if i + 1 == initial_panels { hi } else { a + width };
        let (value, error) = gauss_kronrod_15(f, a, b);
        evaluations += 15;
        heap.push(Panel { lo: a, hi: b, value, error });
    }

    let totals = |heap: &BinaryHeap<Panel>| {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = totals(&heap);
    let mut converged = error <= cfg.abs_tol.max(cfg.rel_tol * value.abs());
    while !converged && heap.len() < cfg.max_subdivisions {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_15(f, worst.lo, mid);
        let (v2, e2) = gauss_kronrod_15(f, mid, worst.hi);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Panel { lo: mid, hi: worst.hi, value: v2, error: e2 });
        converged = error <= cfg.abs_tol.max(cfg.rel_tol * value.abs());
    }
    // re-sum to drop the drift of the running updates
    let (value, error) = totals(&heap);
    Estimate {
        value,
        error,
        converged: converged || error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()),
        evaluations,
    }
}

fn gauss_kronrod_15_multi<F: Fn(f64) -> Vec<f64>>(f: &F, m: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut left = Vec::with_capacity(7);
    let mut right = Vec::with_capacity(7);
    for x in XGK.iter().take(7) {
        let dx = half * x;
        left.push(f(center - dx));
        right.push(f(center + dx));
    }
    (0..m)
        .map(|k| {
            let fv1: [f64; 7] = std::array::from_fn(|j| left[j][k]);
            let fv2: [f64; 7] = std::array::from_fn(|j| right[j][k]);
            combine_15(fc[k], &fv1, &fv2, half)
        })
        .collect()
}

struct MultiPanel {
    lo: f64,
    hi: f64,
    parts: Vec<(f64, f64)>,
    priority: f64,
}

/// Adaptive integration of the `m` components of a vector-valued integrand
/// over a shared partition. Refinement continues until every component meets
/// its own tolerance; the panel refined next is the one whose worst component
/// error, relative to that component's tolerance, is largest.
pub fn integrate_1d_multi<F: Fn(f64) -> Vec<f64>>(
    f: F,
    m: usize,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Vec<Estimate> {
    if !(hi > lo) || m == 0 {
        return vec![Estimate::ZERO; m];
    }
    let tolerance = |totals: &[(f64, f64)]| -> Vec<f64> {
        totals
            .iter()
            .map(|(v, _)| cfg.abs_tol.max(cfg.rel_tol * v.abs()))
            .collect()
    };
    let sum = |panels: &[MultiPanel]| -> Vec<(f64, f64)> {
        let mut t = vec![(0.0, 0.0); m];
        for p in panels {
            for (acc, part) in t.iter_mut().zip(&p.parts) {
                acc.0 += part.0;
                acc.1 += part.1;
            }
        }
        t
    };
    let mut panels = vec![MultiPanel {
        lo,
        hi,
        parts: gauss_kronrod_15_multi(&f, m, lo, hi),
        priority: 0.0,
    }];
    let mut evaluations = 15;
    loop {
        let totals = sum(&panels);
        let tol = tolerance(&totals);
        let done = totals.iter().zip(&tol).all(|((_, e), t)| e <= t);
        if done || panels.len() >= cfg.max_subdivisions {
            return totals
                .iter()
                .zip(&tol)
                .map(|(&(value, error), &t)| Estimate {
                    value,
                    error,
                    converged: error <= t,
                    evaluations,
                })
                .collect();
        }
        for p in panels.iter_mut() {
            p.priority = p
                .parts
                .iter()
                .zip(&tol)
                .map(|((_, e), t)| e / t.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.priority.total_cmp(&b.1.priority))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            panels.push(p);
            let totals = sum(&panels);
            return totals
                .iter()
                .map(|&(value, error)| Estimate { value, error, converged: false, evaluations })
                .collect();
        }
        panels.push(MultiPanel { lo: p.lo, hi: mid, parts: gauss_kronrod_15_multi(&f, m, p.lo, mid), priority: 0.0 });
        panels.push(MultiPanel { lo: mid, hi: p.hi, parts: gauss_kronrod_15_multi(&f, m, mid, p.hi), priority: 0.0 });
        evaluations += 30;
    }
}

/// Nested integral `∫_{outer} inner(x) dx` where `inner` is itself an
/// adaptive estimate computed with the configuration it is handed.
///
/// Inner tolerances are half the outer ones (the absolute one further scaled
/// by the outer width). The reported error is the outer error plus the outer
/// width times the worst inner error; the result is converged only when every
/// inner estimate converged too.
pub fn integrate_nested<I>(outer: (f64, f64), initial_panels: usize, cfg: &QuadratureConfig, inner: I) -> Estimate
where
    I: Fn(f64, &QuadratureConfig) -> Estimate,
{
    let (lo, hi) = outer;
    if !(hi > lo) {
        return Estimate::ZERO;
    }
    let width = hi - lo;
    let inner_cfg = cfg.with_tolerances(0.5 * cfg.rel_tol, 0.5 * cfg.abs_tol / width);
    let inner_ok = Cell::new(true);
    let inner_err = Cell::new(0.0_f64);
    let inner_evals = Cell::new(0_usize);
    let outer_fn = |x: f64| {
        let est = inner(x, &inner_cfg);
        if !est.converged {
            inner_ok.set(false);
        }
        inner_err.set(inner_err.get().max(est.error));
        inner_evals.set(inner_evals.get() + est.evaluations);
        est.value
    };
    let est = adaptive(&outer_fn, lo, hi, initial_panels, cfg);
    Estimate {
        value: est.value,
        error: est.error + width * inner_err.get(),
        converged: est.converged && inner_ok.get(),
        evaluations: inner_evals.get(),
    }
}

/// Iterated integral `∫_{outer} ∫_{window(x)} f(x, y) dy dx`.
///
/// `window(x)` returns the inner limits at `x`, or `None` where the inner
/// integrand vanishes identically.
pub fn integrate_iterated<F, W>(
    f: F,
    outer: (f64, f64),
    window: W,
    initial_panels: usize,
    cfg: &QuadratureConfig,
) -> Estimate
where
    F: Fn(f64, f64) -> f64,
    W: Fn(f64) -> Option<(f64, f64)>,
{
    integrate_nested(outer, initial_panels, cfg, |x, inner_cfg| match window(x) {
        Some((y0, y1)) => adaptive(&|y| f(x, y), y0, y1, 1, inner_cfg),
        None => Estimate::ZERO,
    })
}

// Panels each direction starts from on a bare rectangle. Without a window
// around the support, one 15-point rule can miss a narrow ridge entirely and
// report a confident zero.
const RECT_PANELS: usize = 8;

/// Iterated integral over the rectangle `x_range × y_range`; the inner
/// variable is `y`. Both directions start from several panels.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    cfg: &QuadratureConfig,
) -> Estimate {
    integrate_nested(x_range, RECT_PANELS, cfg, |x, inner_cfg| {
        adaptive(&|y| f(x, y), y_range.0, y_range.1, RECT_PANELS, inner_cfg)
    })
}
