//! Probabilistic description of the randomized Pielou logistic equation
//!
//! ```text
//! X_{n+1} = A X_n / (1 + B X_n),    X_0 = C
//! ```
//!
//! with random growth factor `A > 1`, crowding coefficient `B > 0` and initial
//! size `C > 0`. The crate computes, by the random variable transformation
//! technique, the density of the solution `X_n` at any period, of the steady
//! state `(A - 1) / B`, and of the (continuous) period at which a prescribed
//! level is reached. On top of those densities it provides moments, interval
//! probabilities and equal-tailed confidence intervals, an independent Monte
//! Carlo oracle, and least-squares calibration of Gaussian inputs to an
//! observed series.
//!
//! Module map:
//!
//! * [`distributions`] – the four shipped input laws and their independence product
//! * [`model`] – deterministic recursion, closed form, inverse maps and Jacobians
//! * [`numerics`] – adaptive Gauss–Kronrod quadrature and Brent root finding
//! * [`rvt`] – the three transformed densities and [`DensityGrid`] tabulation
//! * [`statistics`] – moments, interval probabilities, Chebyshev bounds, confidence intervals
//! * [`montecarlo`] – pathwise simulation and Kolmogorov–Smirnov comparisons
//! * [`calibration`] – data ingestion, objective, Nelder–Mead fitting

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod distributions;
pub mod grid;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod rvt;
pub mod statistics;

pub use calibration::{DataSeries, FitOptions, FitResult, ModelParams};
pub use distributions::{DistributionKind, DistributionSpec, InputBox, JointDensity, JointInputs};
pub use grid::{DensityGrid, DensityKind, GridSpec, Spacing};
pub use model::{HittingSpec, PielouPoint};
pub use montecarlo::SimulationResult;
pub use numerics::{Estimate, QuadratureConfig};
pub use statistics::{ConfidenceInterval, MomentReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no sign change of the function on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("grid quality: {0}")]
    Quality(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("row {row}: {message}")]
    Data { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
