//! Deterministic Pielou recursion and the inverse mappings the density engine
//! integrates.
//!
//! Powers `a^n` are never formed directly: every expression is divided through
//! by `a^n` so only `q = a^{-n}` appears. `q` underflows gracefully to zero for
//! large `n`, which keeps the closed form and the Jacobians finite.

use crate::{Error, Result};

/// One realization `(c, a, b)` of the inputs: initial size, growth factor and
/// crowding coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PielouPoint {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl PielouPoint {
    pub fn new(c: f64, a: f64, b: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("initial size c must be > 0"));
        }
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::invalid("growth factor a must be > 1"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("crowding coefficient b must be > 0"));
        }
        Ok(Self { c, a, b })
    }
}

/// Target level `x̂` for the hitting time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingSpec {
    pub x_hat: f64,
}

impl HittingSpec {
    pub fn new(x_hat: f64) -> Result<Self> {
        if !(x_hat > 0.0 && x_hat.is_finite()) {
            return Err(Error::invalid("target level x_hat must be > 0"));
        }
        Ok(Self { x_hat })
    }
}

/// Value of an inverse mapping at one point, with the absolute Jacobian of the
/// recovered coordinate. `None` marks points outside the image of the forward
/// map; they contribute nothing to a density integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMap {
    pub value: f64,
    pub jacobian_abs: f64,
}

/// `(a^{-n}, 1 - a^{-n})` with the complement computed without cancellation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Decay {
    pub q: f64,
    pub one_minus_q: f64,
    pub ln_a: f64,
}

impl Decay {
    pub fn new(a: f64, n: f64) -> Self {
        let ln_a = (a - 1.0).ln_1p();
        let t = n * ln_a;
        Self {
            q: (-t).exp(),
            one_minus_q: -(-t).exp_m1(),
            ln_a,
        }
    }
}

/// `x_n` by applying the recursion `n` times from `x_0 = c`.
pub fn iterate(p: &PielouPoint, n: u32) -> f64 {
    let mut x = p.c;
    for _ in 0..n {
        x = p.a * x / (1.0 + p.b * x);
    }
    x
}

pub(crate) fn closed_form_scaled(c: f64, a: f64, b: f64, d: &Decay) -> f64 {
    let am1 = a - 1.0;
    am1 / (b * d.one_minus_q + d.q * am1 / c)
}

/// Closed-form solution `a^n (a-1) / (b a^n + (a-1)/c - b)`.
pub fn solve_closed_form(p: &PielouPoint, n: u32) -> f64 {
    closed_form_scaled(p.c, p.a, p.b, &Decay::new(p.a, n as f64))
}

/// Closed form at a real-valued period.
pub fn solve_at(p: &PielouPoint, n: f64) -> f64 {
    closed_form_scaled(p.c, p.a, p.b, &Decay::new(p.a, n))
}

/// Limit `(a - 1) / b` of the trajectory.
pub fn steady_state(p: &PielouPoint) -> f64 {
    (p.a - 1.0) / p.b
}

/// Real-valued period at which the closed form equals `x̂`, whenever the
/// logarithm is defined. The result is negative when the level lies between
/// the initial size and the steady state on the far side from the trajectory
/// (it was passed before period zero).
pub fn hitting_period(p: &PielouPoint, x_hat: f64) -> Option<f64> {
    let am1 = p.a - 1.0;
    let ratio = x_hat * (p.c * p.b - am1) / (p.c * (p.b * x_hat - am1));
    if ratio > 0.0 && ratio.is_finite() {
        Some(ratio.ln() / (am1).ln_1p())
    } else {
        None
    }
}

/// Period `N` at which the trajectory from `p` reaches `x̂`.
///
/// Accepts growing (`c < x̂ < (a-1)/b`) and decaying (`(a-1)/b < x̂ < c`)
/// trajectories; `x̂ = c` gives zero. Any other level is never attained.
pub fn hitting_time(p: &PielouPoint, h: &HittingSpec) -> Result<f64> {
    let x_hat = h.x_hat;
    if x_hat == p.c {
        return Ok(0.0);
    }
    let s = steady_state(p);
    let between = (p.c < x_hat && x_hat < s) || (s < x_hat && x_hat < p.c);
    if !between {
        return Err(Error::domain(format!(
            "level unreachable: x_hat = {x_hat} is not strictly between c = {} and the steady state {s}",
            p.c
        )));
    }
    hitting_period(p, x_hat)
        .ok_or_else(|| Error::domain(format!("level unreachable: x_hat = {x_hat}")))
}

pub(crate) fn inverse_c_scaled(x: f64, a: f64, b: f64, d: &Decay) -> Option<InverseMap> {
    if d.one_minus_q == 0.0 {
        // period zero: the identity
        return (x > 0.0).then_some(InverseMap { value: x, jacobian_abs: 1.0 });
    }
    let am1 = a - 1.0;
    // denominator a^n(a-1) - b x (a^n - 1), divided by a^n
    let den = am1 - b * x * d.one_minus_q;
    if !(den > 0.0) {
        return None;
    }
    let c = x * am1 * d.q / den;
    if !(c > 0.0) {
        return None;
    }
    Some(InverseMap {
        value: c,
        jacobian_abs: am1 * am1 * d.q / (den * den),
    })
}

/// Initial size recovered from `x_n = x` at fixed `(a, b)`, with `|∂c/∂x|`.
pub fn inverse_map_c(x: f64, a: f64, b: f64, n: u32) -> Option<InverseMap> {
    inverse_c_scaled(x, a, b, &Decay::new(a, n as f64))
}

pub(crate) fn inverse_b_scaled(x: f64, a: f64, c: f64, d: &Decay) -> Option<InverseMap> {
    let am1 = a - 1.0;
    let b = am1 * (1.0 / x - d.q / c) / d.one_minus_q;
    if !(b > 0.0) || !b.is_finite() {
        return None;
    }
    Some(InverseMap {
        value: b,
        jacobian_abs: am1 / (x * x * d.one_minus_q),
    })
}

/// Crowding coefficient recovered from `x_n = x` at fixed `(a, c)`, with
/// `|∂b/∂x|`. Not invertible at `n = 0`.
pub fn inverse_map_b(x: f64, a: f64, c: f64, n: u32) -> Result<Option<InverseMap>> {
    if n == 0 {
        return Err(Error::domain("the solution does not depend on b at period 0"));
    }
    Ok(inverse_b_scaled(x, a, c, &Decay::new(a, n as f64)))
}

pub(crate) fn inverse_hitting_scaled(x_hat: f64, a: f64, b: f64, d: &Decay) -> Option<InverseMap> {
    let am1 = a - 1.0;
    let gap = am1 - x_hat * b;
    if !(gap > 0.0) {
        // level at or above the steady state
        return None;
    }
    let den = gap + x_hat * b * d.q;
    if !(den > 0.0) || !den.is_finite() {
        return None;
    }
    let c = x_hat * am1 * d.q / den;
    if !(c > 0.0) || !c.is_finite() {
        return None;
    }
    Some(InverseMap {
        value: c,
        jacobian_abs: x_hat * am1 * d.q * d.ln_a * gap / (den * den),
    })
}

/// Initial size for which the trajectory with `(a, b)` sits at `x̂` at the
/// real period `n`, with `|∂c/∂n|`.
pub fn inverse_map_hitting(n: f64, a: f64, b: f64, x_hat: f64) -> Option<InverseMap> {
    inverse_hitting_scaled(x_hat, a, b, &Decay::new(a, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: f64, a: f64, b: f64) -> PielouPoint {
        PielouPoint::new(c, a, b).unwrap()
    }

    #[test]
    fn fixed_point_and_identity() {
        let fixed = p(1.0, 2.0, 1.0);
        assert_eq!(iterate(&fixed, 5), 1.0);
        assert!((solve_closed_form(&fixed, 10) - 1.0).abs() < 1e-15);
        let q = p(0.5, 1.5, 0.1);
        assert_eq!(iterate(&q, 0), 0.5);
        assert!((solve_closed_form(&q, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_steps_by_hand() {
        // exact rationals: x1 = 0.75/1.05 = 5/7, x2 = (15/14)/(1 + 1/14) = 1,
        // x3 = 1.5/1.1 = 15/11
        let q = p(0.5, 1.5, 0.1);
        assert!((iterate(&q, 1) - 5.0 / 7.0).abs() < 1e-15);
        assert!((iterate(&q, 2) - 1.0).abs() < 1e-15);
        assert!((iterate(&q, 3) - 15.0 / 11.0).abs() < 1e-15);
        for n in 1..=50 {
            let (r, c) = (iterate(&q, n), solve_closed_form(&q, n));
            assert!(((r - c) / r).abs() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn unit_growth_limit() {
        // the a = 1 branch 1/(1/c + b n) is the limit of the closed form
        let (c, b, n) = (0.7, 0.3, 12);
        let limit = 1.0 / (1.0 / c + b * n as f64);
        let near = solve_closed_form(&p(c, 1.0 + 1e-9, b), n);
        assert!((near - limit).abs() < 1e-7);
    }

    #[test]
    fn steady_state_examples() {
        assert_eq!(steady_state(&p(1.0, 2.0, 0.5)), 2.0);
        assert_eq!(steady_state(&p(3.0, 2.0, 1.0)), 1.0);
        assert!((solve_closed_form(&p(0.5, 1.5, 0.1), 200) - 5.0).abs() < 1e-8);
        // huge n must not overflow
        assert!((solve_closed_form(&p(0.5, 1.5, 0.1), 5000) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hitting_time_examples() {
        let q = p(0.5, 1.5, 0.1);
        assert_eq!(hitting_time(&q, &HittingSpec::new(0.5).unwrap()).unwrap(), 0.0);
        let x7 = solve_closed_form(&q, 7);
        let n = hitting_time(&q, &HittingSpec::new(x7).unwrap()).unwrap();
        assert!((n - 7.0).abs() < 1e-9);
        let err = hitting_time(&q, &HittingSpec::new(5.0).unwrap());
        assert!(matches!(err, Err(Error::Domain(_))));
        assert!(hitting_time(&q, &HittingSpec::new(0.2).unwrap()).is_err());

        // decaying trajectory from above the steady state
        let down = p(8.0, 1.5, 0.1);
        let x4 = solve_closed_form(&down, 4);
        let n = hitting_time(&down, &HittingSpec::new(x4).unwrap()).unwrap();
        assert!((n - 4.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_c_examples() {
        let m = inverse_map_c(0.8, 1.7, 0.4, 0).unwrap();
        assert!((m.value - 0.8).abs() < 1e-15);
        assert!((m.jacobian_abs - 1.0).abs() < 1e-15);

        let q = p(0.5, 1.5, 0.1);
        let x = solve_closed_form(&q, 6);
        let m = inverse_map_c(x, 1.5, 0.1, 6).unwrap();
        assert!((m.value - 0.5).abs() < 1e-14);

        // beyond a^n (a-1) / (b (a^n - 1)) the point is not an image
        let (a, b, n) = (1.5_f64, 0.1, 6);
        let edge = a.powi(n) * (a - 1.0) / (b * (a.powi(n) - 1.0));
        assert!(inverse_map_c(edge * 1.000001, a, b, n as u32).is_none());
    }

    #[test]
    fn inverse_b_examples() {
        let m = inverse_map_b(1.0, 2.0, 1.0, 1).unwrap().unwrap();
        assert!((m.value - 1.0).abs() < 1e-15);
        assert!((m.jacobian_abs - 2.0).abs() < 1e-15);

        let q = p(0.5, 1.5, 0.1);
        let x = solve_closed_form(&q, 9);
        let m = inverse_map_b(x, 1.5, 0.5, 9).unwrap().unwrap();
        assert!((m.value - 0.1).abs() < 1e-13);

        // zero crowding: x = a^n c sits on the boundary of the image
        let x = 1.5_f64.powi(3) * 0.5;
        assert!(inverse_map_b(x * (1.0 + 1e-12), 1.5, 0.5, 3).unwrap().is_none());
        assert!(inverse_map_b(1.0, 2.0, 1.0, 0).is_err());
    }

    #[test]
    fn inverse_hitting_examples() {
        let m = inverse_map_hitting(0.0, 1.5, 0.1, 2.0).unwrap();
        assert!((m.value - 2.0).abs() < 1e-14);

        let q = p(0.5, 1.5, 0.1);
        let n = hitting_time(&q, &HittingSpec::new(3.0).unwrap()).unwrap();
        let m = inverse_map_hitting(n, 1.5, 0.1, 3.0).unwrap();
        assert!((m.value - 0.5).abs() < 1e-12);

        for n in [-3.0, 0.0, 2.5, 40.0] {
            assert!(inverse_map_hitting(n, 1.5, 0.1, 5.0).is_none());
            assert!(inverse_map_hitting(n, 1.5, 0.1, 6.0).is_none());
        }
    }

    fn point() -> impl Strategy<Value = PielouPoint> {
        (0.05f64..5.0, 1.01f64..3.0, 0.01f64..2.0).prop_map(|(c, a, b)| p(c, a, b))
    }

    proptest! {
        #[test]
        fn closed_form_matches_recursion(q in point(), n in 0u32..=60) {
            let r = iterate(&q, n);
            let c = solve_closed_form(&q, n);
            prop_assert!(((r - c) / r).abs() < 1e-10);
        }

        #[test]
        fn monotone_towards_steady_state(q in point()) {
            let s = steady_state(&q);
            prop_assume!((q.c - s).abs() > 1e-6 * s);
            let mut prev = q.c;
            for n in 1..40 {
                let x = solve_closed_form(&q, n);
                // strict until the iterates agree with s to rounding
                let saturated = (x - s).abs() <= 1e-13 * s;
                if q.c < s {
                    prop_assert!((x > prev || saturated) && x <= s * (1.0 + 1e-12));
                } else {
                    prop_assert!((x < prev || saturated) && x >= s * (1.0 - 1e-12));
                }
                prev = x;
            }
        }

        #[test]
        fn inverse_maps_round_trip(q in point(), n in 1u32..=30) {
            let x = solve_closed_form(&q, n);
            // once x_n is within rounding of the steady state, c is no
            // longer recoverable in floating point
            let s = steady_state(&q);
            prop_assume!((x - s).abs() > 1e-5 * s);
            let c = inverse_map_c(x, q.a, q.b, n).unwrap().value;
            prop_assert!(((c - q.c) / q.c).abs() < 1e-9);
            let b = inverse_map_b(x, q.a, q.c, n).unwrap().unwrap().value;
            prop_assert!(((b - q.b) / q.b).abs() < 1e-9);
        }

        #[test]
        fn hitting_round_trip(q in point(), frac in 0.05f64..0.95) {
            let s = steady_state(&q);
            let x_hat = q.c + frac * (s - q.c);
            prop_assume!((x_hat - q.c).abs() > 1e-9 * q.c);
            let n = hitting_time(&q, &HittingSpec::new(x_hat).unwrap()).unwrap();
            let back = solve_at(&q, n);
            prop_assert!(((back - x_hat) / x_hat).abs() < 1e-8);
            if q.c < s {
                let c = inverse_map_hitting(n, q.a, q.b, x_hat).unwrap().value;
                prop_assert!(((c - q.c) / q.c).abs() < 1e-9);
            }
        }
    }
}
