//! Shared inputs and independent oracles for the integration tests.
#![allow(dead_code)]

use pielou_core::{DataSeries, DistributionSpec, JointInputs, ModelParams};

/// Truncated-normal initial size, uniform growth factor, beta crowding.
pub fn experiment() -> JointInputs {
    JointInputs::new(
        DistributionSpec::truncated_gaussian(0.5, 0.05, 0.0, 1.0).unwrap(),
        DistributionSpec::uniform(1.1, 2.0).unwrap(),
        DistributionSpec::beta(2.0, 3.0).unwrap(),
    )
}

/// `E[(A - 1) / B] = E[A - 1] · E[1/B]` for the experiment inputs, from the
/// closed-form moments: `E[A] = (lo + hi) / 2` and, for `B ~ Beta(α, β)`,
/// `E[1/B] = (α + β - 1) / (α - 1)`.
pub fn experiment_steady_mean() -> f64 {
    let mean_a_minus_1 = (1.1 + 2.0) / 2.0 - 1.0;
    let mean_inv_b = (2.0 + 3.0 - 1.0) / (2.0 - 1.0);
    mean_a_minus_1 * mean_inv_b
}

/// Reference Gaussian hyperparameters for the mobile-lines series.
pub fn reference_params() -> ModelParams {
    ModelParams { mu_a: 1.4912, mu_b: 0.095109, mu_c: 1.76917, sigma_a: 0.00531, sigma_b: 0.0025587, sigma_c: 0.0050285 }
}

/// Mobile lines in Spain, 1999 to 2015 (raw counts).
pub const MOBILE_LINES: [f64; 17] = [
    15003708.0, 24265059.0, 29655729.0, 33530997.0, 37219839.0, 38622582.0, 42693832.0, 45675855.0, 48422470.0,
    49623339.0, 51052693.0, 51389417.0, 52590507.0, 50665099.0, 50158689.0, 50806251.0, 51067569.0,
];

/// The series in units of ten million lines.
pub fn mobile_lines() -> DataSeries {
    let rows: Vec<(u32, f64)> = MOBILE_LINES.iter().enumerate().map(|(i, x)| (i as u32, x / 1e7)).collect();
    DataSeries::new(&rows).unwrap()
}

pub fn ln_sqrt_2pi() -> f64 {
    0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - ln_sqrt_2pi()).exp()
}

/// Standard normal CDF without any error-function library: the Taylor series
/// `Φ(z) = 1/2 + φ(z) Σ z^{2k+1} / (2k+1)!!` near the origin and a Lentz
/// continued fraction for the tail `Q(z) = φ(z) / (z + 1/(z + 2/(z + ...)))`.
pub fn normal_cdf_oracle(z: f64) -> f64 {
    if z.abs() < 3.0 {
        let mut term = z;
        let mut sum = z;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            term *= z * z / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
        }
        0.5 + normal_pdf(z) * sum
    } else if z > 0.0 {
        1.0 - normal_tail(z)
    } else {
        normal_tail(-z)
    }
}

/// Upper tail `Q(z)` for `z >= 3` by the modified Lentz algorithm.
pub fn normal_tail(z: f64) -> f64 {
    let tiny = 1e-300;
    // Q(z) = φ(z) / (z + 1/(z + 2/(z + 3/(z + ...))))
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    normal_pdf(z) / f
}

/// Sup distance between the ECDF of `samples` and a reference CDF.
pub fn ks_against<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
