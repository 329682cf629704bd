use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pielou", version, about = "Densities, moments, simulation and calibration for the randomized Pielou logistic equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Directory for the output files (created if missing)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abscissae per density grid
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the solution density at each period, plus the steady state
    Pdf {
        #[command(flatten)]
        common: Common,
        /// Periods, e.g. `1,2,3,5,10,15` or `1..50` (empty for none)
        #[arg(long, value_parser = parse_periods)]
        n: Option<Periods>,
    },
    /// Moments and confidence intervals per period, plus a steady-state row
    Moments {
        #[command(flatten)]
        common: Common,
        /// Periods, e.g. `1..50` (inclusive)
        #[arg(long, value_parser = parse_periods)]
        n: Option<Periods>,
        /// Interval levels, e.g. `0.25,0.01`
        #[arg(long, value_parser = parse_alphas)]
        alpha: Option<Reals>,
    },
    /// Fit Gaussian inputs to a `year,n,x` series and emit the expectation curve
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_alphas)]
        alpha: Option<Reals>,
        /// Skip the optimization and evaluate the configured `params`
        #[arg(long)]
        fixed: bool,
    },
    /// Tabulate the hitting-time density for each level
    Hitting {
        #[command(flatten)]
        common: Common,
        /// Levels, e.g. `2,2.5,3`
        #[arg(long = "x-hat", value_parser = parse_levels)]
        x_hat: Option<Reals>,
    },
    /// Sample one variable by Monte Carlo and compare with its density grid
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: SimKind,
        /// Sample count (default 1000000)
        #[arg(long)]
        count: Option<usize>,
        /// Period for `--kind solution` (default 5)
        #[arg(long)]
        n: Option<u32>,
        /// Level for `--kind hitting` (default 3)
        #[arg(long = "x-hat")]
        x_hat: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Solution,
    Steady,
    Hitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Periods(pub Vec<u32>);

#[derive(Debug, Clone, PartialEq)]
pub struct Reals(pub Vec<f64>);

/// Comma-separated periods; `a..b` is an inclusive range.
pub fn parse_periods(s: &str) -> Result<Periods, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in `{item}`"))?;
            let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in `{item}`"))?;
            if b < a {
                return Err(format!("empty range `{item}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|_| format!("`{item}` is not a period"))?);
        }
    }
    Ok(Periods(out))
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

pub fn parse_alphas(s: &str) -> Result<Reals, String> {
    let v = parse_reals(s)?;
    if let Some(a) = v.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(format!("alpha must lie in (0, 1), got {a}"));
    }
    Ok(Reals(v))
}

pub fn parse_levels(s: &str) -> Result<Reals, String> {
    let v = parse_reals(s)?;
    if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(format!("levels must be positive, got {x}"));
    }
    Ok(Reals(v))
}
