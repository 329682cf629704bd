//! Tabulated densities and their CSV form.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::numerics::QuadratureConfig;
use crate::{Error, Result};

/// Which density a grid (or a simulation) describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// `X_n` at a fixed period.
    SolutionAtPeriod(u32),
    /// `X_∞ = (A - 1) / B`.
    SteadyState,
    /// Period at which the level `x̂` is reached.
    HittingTime(f64),
}

impl DensityKind {
    /// Whether the variable is positive by construction.
    pub fn is_positive(&self) -> bool {
        !matches!(self, DensityKind::HittingTime(_))
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::SolutionAtPeriod(n) => write!(f, "solution(n={n})"),
            DensityKind::SteadyState => write!(f, "steady_state"),
            DensityKind::HittingTime(x) => write!(f, "hitting_time(x_hat={x})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    /// Geometric spacing; requires a positive lower end.
    Log,
}

/// Abscissa range and resolution of a tabulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn linear(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points, spacing: Spacing::Linear }
    }

    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points, spacing: Spacing::Log }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!(
                "grid range [{}, {}] is empty or inverted",
                self.lo, self.hi
            )));
        }
        if self.points < 2 {
            return Err(Error::invalid("grid needs at least 2 points"));
        }
        if self.spacing == Spacing::Log && !(self.lo > 0.0) {
            return Err(Error::invalid("log-spaced grid needs a positive lower end"));
        }
        Ok(())
    }

    pub fn abscissae(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.lo + t * (self.hi - self.lo),
                    Spacing::Log => (self.lo.ln() + t * (self.hi / self.lo).ln()).exp(),
                }
            })
            .collect()
    }
}

/// A density tabulated on an increasing set of abscissae.
///
/// The values are never rescaled: `mass` is the trapezoidal integral of the
/// grid, reported so that quadrature or range problems stay visible.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: DensityKind,
    pub mass: f64,
    /// Every pointwise quadrature met its tolerance.
    pub converged: bool,
    /// Largest pointwise error estimate.
    pub max_error: f64,
    pub quadrature: QuadratureConfig,
}

impl DensityGrid {
    pub fn new(
        kind: DensityKind,
        abscissae: Vec<f64>,
        values: Vec<f64>,
        converged: bool,
        max_error: f64,
        quadrature: QuadratureConfig,
    ) -> Result<Self> {
        if abscissae.len() != values.len() || abscissae.len() < 2 {
            return Err(Error::invalid("grid needs matching abscissae and values, at least 2"));
        }
        if abscissae.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid abscissae must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("grid densities must be finite and non-negative"));
        }
        let mass = trapezoid(&abscissae, &values);
        Ok(Self { abscissae, values, kind, mass, converged, max_error, quadrature })
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.abscissae[0], *self.abscissae.last().expect("non-empty grid"))
    }

    /// Linear interpolation; zero outside the tabulated range.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let i = self.abscissae.partition_point(|&t| t <= x).clamp(1, self.len() - 1);
        let (x0, x1) = (self.abscissae[i - 1], self.abscissae[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Cumulative trapezoidal integral at each abscissa (starts at 0, ends at `mass`).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        for i in 1..self.len() {
            acc += 0.5 * (self.values[i] + self.values[i - 1]) * (self.abscissae[i] - self.abscissae[i - 1]);
            out.push(acc);
        }
        out
    }

    /// Integral of the interpolated density from the left end up to `x`
    /// (exact for the piecewise-linear interpolant; not divided by `mass`).
    pub fn cdf_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.range();
        if !(x > lo) {
            return 0.0;
        }
        if x >= hi {
            return self.mass;
        }
        let i = self.abscissae.partition_point(|&t| t <= x).clamp(1, self.len() - 1);
        let mut acc = 0.0;
        for k in 1..i {
            acc += 0.5 * (self.values[k] + self.values[k - 1]) * (self.abscissae[k] - self.abscissae[k - 1]);
        }
        acc + self.partial_segment(i, x)
    }

    // integral over [x_{i-1}, x] of the linear interpolant on segment i
    fn partial_segment(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.abscissae[i - 1], self.abscissae[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        let t = x - x0;
        y0 * t + 0.5 * (y1 - y0) * t * t / (x1 - x0)
    }

    /// [`cdf_at`](Self::cdf_at) at many sorted points in one pass.
    pub fn cdf_at_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let cum = self.cumulative();
        let (lo, hi) = self.range();
        let mut i = 1;
        xs.iter()
            .map(|&x| {
                if !(x > lo) {
                    return 0.0;
                }
                if x >= hi {
                    return self.mass;
                }
                while self.abscissae[i] <= x {
                    i += 1;
                }
                cum[i - 1] + self.partial_segment(i, x)
            })
            .collect()
    }

    /// Abscissa of the largest tabulated density.
    pub fn mode(&self) -> f64 {
        let i = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.abscissae[i]
    }

    /// `∫ |f - g|` over the union of both abscissa sets, each grid linearly
    /// interpolated and taken as zero outside its range.
    pub fn l1_distance(&self, other: &DensityGrid) -> f64 {
        let mut xs: Vec<f64> = self.abscissae.iter().chain(&other.abscissae).copied().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let diffs: Vec<f64> = xs.iter().map(|&x| (self.value_at(x) - other.value_at(x)).abs()).collect();
        trapezoid(&xs, &diffs)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let kind = match self.kind {
            DensityKind::SolutionAtPeriod(n) => format!("# kind: solution\n# n: {n}"),
            DensityKind::SteadyState => "# kind: steady_state".to_string(),
            DensityKind::HittingTime(x) => format!("# kind: hitting_time\n# x_hat: {x}"),
        };
        writeln!(out, "{kind}")?;
        writeln!(out, "# mass: {}", self.mass)?;
        writeln!(out, "# converged: {}", self.converged)?;
        writeln!(out, "# max_error: {:e}", self.max_error)?;
        writeln!(out, "# rel_tol: {:e}", self.quadrature.rel_tol)?;
        writeln!(out, "# abs_tol: {:e}", self.quadrature.abs_tol)?;
        writeln!(out, "# max_subdivisions: {}", self.quadrature.max_subdivisions)?;
        writeln!(out, "# truncation_k: {}", self.quadrature.gaussian_truncation_k)?;
        writeln!(out, "abscissa,density")?;
        for (x, y) in self.abscissae.iter().zip(&self.values) {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut header_seen = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let row = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header_seen {
                if line != "abscissa,density" {
                    return Err(Error::Data { row, message: format!("expected header `abscissa,density`, found `{line}`") });
                }
                header_seen = true;
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| Error::Data { row, message: "expected two columns".into() })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Data { row, message: format!("bad number `{s}`: {e}") })
            };
            xs.push(parse(x)?);
            ys.push(parse(y)?);
        }
        let get = |k: &str| meta.get(k).map(String::as_str);
        let num = |k: &str| -> Result<f64> {
            get(k)
                .ok_or_else(|| Error::invalid(format!("missing metadata `{k}`")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("metadata `{k}`: {e}")))
        };
        let kind = match get("kind") {
            Some("solution") => DensityKind::SolutionAtPeriod(num("n")? as u32),
            Some("steady_state") => DensityKind::SteadyState,
            Some("hitting_time") => DensityKind::HittingTime(num("x_hat")?),
            other => return Err(Error::invalid(format!("unknown grid kind {other:?}"))),
        };
        let quadrature = QuadratureConfig {
            rel_tol: num("rel_tol")?,
            abs_tol: num("abs_tol")?,
            max_subdivisions: num("max_subdivisions")? as usize,
            gaussian_truncation_k: num("truncation_k")?,
        };
        let converged = get("converged") == Some("true");
        let max_error = num("max_error").unwrap_or(0.0);
        Self::new(kind, xs, ys, converged, max_error, quadrature)
    }
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}
