//! Quadrature and root-finding kernels shared by the density engine, the
//! statistics layer and the calibration loop.

mod quadrature;
mod roots;

pub use quadrature::{
    integrate_1d, integrate_1d_multi, integrate_2d, integrate_iterated, integrate_nested, Estimate, QuadratureConfig,
};
pub(crate) use quadrature::adaptive;
pub use roots::find_root;
