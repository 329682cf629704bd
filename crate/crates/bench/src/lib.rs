//! Fixed inputs shared by the benchmarks in `benches/`.

use pielou_core::{DataSeries, DistributionSpec, JointInputs, ModelParams};

/// Truncated-normal initial size, uniform growth factor, beta crowding.
pub fn experiment() -> JointInputs {
    JointInputs::new(
        DistributionSpec::truncated_gaussian(0.5, 0.05, 0.0, 1.0).unwrap(),
        DistributionSpec::uniform(1.1, 2.0).unwrap(),
        DistributionSpec::beta(2.0, 3.0).unwrap(),
    )
}

/// Gaussian hyperparameters fitted to the mobile-lines series.
pub fn mobile_params() -> ModelParams {
    ModelParams { mu_a: 1.4912, mu_b: 0.095109, mu_c: 1.76917, sigma_a: 0.00531, sigma_b: 0.0025587, sigma_c: 0.0050285 }
}

/// Mobile lines in Spain 1999 to 2015, in units of ten million.
pub fn mobile_lines() -> DataSeries {
    const LINES: [f64; 17] = [
        15003708.0, 24265059.0, 29655729.0, 33530997.0, 37219839.0, 38622582.0, 42693832.0, 45675855.0, 48422470.0,
        49623339.0, 51052693.0, 51389417.0, 52590507.0, 50665099.0, 50158689.0, 50806251.0, 51067569.0,
    ];
    let rows: Vec<(u32, f64)> = LINES.iter().enumerate().map(|(i, x)| (i as u32, x / 1e7)).collect();
    DataSeries::new(&rows).unwrap()
}
