//! Univariate input laws and the independence product `f_C · f_A · f_B`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{beta as sbeta, erf};

use crate::numerics::find_root;
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Parameters of one input law. This is the serialized literal, e.g.
/// `{"kind": "beta", "alpha": 2, "beta": 3}`. The second Gaussian parameter
/// is always a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionKind {
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64 },
    Gaussian { mu: f64, sigma: f64 },
    TruncatedGaussian { mu: f64, sigma: f64, lo: f64, hi: f64 },
}

/// A validated univariate law with its normalizing constants cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionKind", into = "DistributionKind")]
pub struct DistributionSpec {
    kind: DistributionKind,
    // log of the density's normalizing factor
    log_norm: f64,
    // truncated Gaussian only: mass of [lo, hi] under the parent law
    mass: f64,
}

impl TryFrom<DistributionKind> for DistributionSpec {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        DistributionSpec::new(kind)
    }
}

impl From<DistributionSpec> for DistributionKind {
    fn from(d: DistributionSpec) -> Self {
        d.kind
    }
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p < 0.5 {
        -SQRT_2 * erf::erfc_inv(2.0 * p)
    } else {
        SQRT_2 * erf::erfc_inv(2.0 * (1.0 - p))
    }
}

/// `Φ(hi) - Φ(lo)` evaluated on the side of the axis where it does not cancel.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    }
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite")))
            }
        };
        let (log_norm, mass) = match kind {
            DistributionKind::Uniform { lo, hi } => {
                finite("lo", lo)?;
                finite("hi", hi)?;
                if !(lo < hi) {
                    return Err(Error::invalid("uniform requires lo < hi"));
                }
                (-(hi - lo).ln(), 1.0)
            }
            DistributionKind::Beta { alpha, beta } => {
                finite("alpha", alpha)?;
                finite("beta", beta)?;
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(Error::invalid("beta requires alpha > 0 and beta > 0"));
                }
                (-sbeta::ln_beta(alpha, beta), 1.0)
            }
            DistributionKind::Gaussian { mu, sigma } => {
                finite("mu", mu)?;
                finite("sigma", sigma)?;
                if !(sigma > 0.0) {
                    return Err(Error::invalid("gaussian requires sigma > 0"));
                }
                (-(sigma.ln() + LN_SQRT_2PI), 1.0)
            }
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                finite("mu", mu)?;
                finite("sigma", sigma)?;
                if !(sigma > 0.0) {
                    return Err(Error::invalid("truncated_gaussian requires sigma > 0"));
                }
                if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                    return Err(Error::invalid("truncated_gaussian requires lo < hi"));
                }
                let mass = normal_mass((lo - mu) / sigma, (hi - mu) / sigma);
                if !(mass > 0.0) {
                    return Err(Error::invalid(
                        "truncated_gaussian interval carries no mass in double precision",
                    ));
                }
                (-(sigma.ln() + LN_SQRT_2PI + mass.ln()), mass)
            }
        };
        Ok(Self { kind, log_norm, mass })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DistributionKind::Uniform { lo, hi })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(DistributionKind::Beta { alpha, beta })
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(DistributionKind::Gaussian { mu, sigma })
    }

    pub fn truncated_gaussian(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DistributionKind::TruncatedGaussian { mu, sigma, lo, hi })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    /// Closed support (may be infinite for the Gaussian).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => (lo, hi),
            DistributionKind::Beta { .. } => (0.0, 1.0),
            DistributionKind::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistributionKind::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    self.log_norm.exp()
                } else {
                    0.0
                }
            }
            DistributionKind::Beta { alpha, beta } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                x.powf(alpha - 1.0) * (1.0 - x).powf(beta - 1.0) * self.log_norm.exp()
            }
            DistributionKind::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                (self.log_norm - 0.5 * z * z).exp()
            }
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                if !(lo..=hi).contains(&x) {
                    return 0.0;
                }
                let z = (x - mu) / sigma;
                (self.log_norm - 0.5 * z * z).exp()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistributionKind::Beta { alpha, beta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    sbeta::beta_reg(alpha, beta, x)
                }
            }
            DistributionKind::Gaussian { mu, sigma } => normal_cdf((x - mu) / sigma),
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    (normal_mass((lo - mu) / sigma, (x - mu) / sigma) / self.mass).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Survival function `P[X > x]`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self.kind {
            DistributionKind::Gaussian { mu, sigma } => normal_sf((x - mu) / sigma),
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                if x <= lo {
                    1.0
                } else if x >= hi {
                    0.0
                } else {
                    (normal_mass((x - mu) / sigma, (hi - mu) / sigma) / self.mass).clamp(0.0, 1.0)
                }
            }
            DistributionKind::Beta { alpha, beta } => {
                if x <= 0.0 {
                    1.0
                } else if x >= 1.0 {
                    0.0
                } else {
                    sbeta::beta_reg(beta, alpha, 1.0 - x)
                }
            }
            DistributionKind::Uniform { .. } => 1.0 - self.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self.kind {
            DistributionKind::Uniform { lo, hi } => lo + p * (hi - lo),
            DistributionKind::Gaussian { mu, sigma } => mu + sigma * normal_quantile(p),
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                let zl = (lo - mu) / sigma;
                let z = if zl >= 0.0 {
                    // upper tail: invert the survival function
                    let s = normal_sf(zl) - p * self.mass;
                    -normal_quantile(s)
                } else {
                    normal_quantile(normal_cdf(zl) + p * self.mass)
                };
                (mu + sigma * z).clamp(lo, hi)
            }
            DistributionKind::Beta { .. } => {
                if p <= 0.0 {
                    return 0.0;
                }
                if p >= 1.0 {
                    return 1.0;
                }
                find_root(|x| self.cdf(x) - p, 0.0, 1.0, 1e-15).unwrap_or(0.5)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistributionKind::Beta { alpha, beta } => alpha / (alpha + beta),
            DistributionKind::Gaussian { mu, .. } => mu,
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                let (zl, zh) = ((lo - mu) / sigma, (hi - mu) / sigma);
                let phi = |z: f64| (-0.5 * z * z - LN_SQRT_2PI).exp();
                mu + sigma * (phi(zl) - phi(zh)) / self.mass
            }
        }
    }

    /// Interval outside of which at most `Φ(-k)` of the mass lies on each side.
    pub fn effective_support(&self, k: f64) -> (f64, f64) {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => (lo, hi),
            DistributionKind::Gaussian { mu, sigma } => (mu - k * sigma, mu + k * sigma),
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                (lo.max(mu - k * sigma), hi.min(mu + k * sigma))
            }
            DistributionKind::Beta { alpha, beta } => {
                let tail = normal_sf(k);
                let lower = self.quantile(tail);
                // upper quantile through the mirrored law keeps precision near 1
                let mirrored = Self::beta(beta, alpha).expect("parameters already validated");
                let upper = 1.0 - mirrored.quantile(tail);
                (lower, upper)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistributionKind::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            DistributionKind::Gaussian { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
            DistributionKind::Beta { alpha, beta } => rand_distr::Beta::new(alpha, beta)
                .expect("parameters already validated")
                .sample(rng),
            DistributionKind::TruncatedGaussian { mu, sigma, lo, hi } => {
                if self.mass >= 0.25 {
                    loop {
                        let z: f64 = StandardNormal.sample(rng);
                        let x = mu + sigma * z;
                        if (lo..=hi).contains(&x) {
                            return x;
                        }
                    }
                }
                self.quantile(rng.random::<f64>())
            }
        }
    }
}

/// Axis-aligned box `c × a × b` that carries all but a negligible part of
/// the joint input mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputBox {
    pub c: (f64, f64),
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl InputBox {
    /// Intersection with the model's positivity constraints `c > 0`, `a > 1`, `b > 0`.
    pub fn constrained(self) -> Self {
        let tiny = f64::MIN_POSITIVE;
        Self {
            c: (self.c.0.max(tiny), self.c.1),
            a: (self.a.0.max(1.0 + f64::EPSILON), self.a.1),
            b: (self.b.0.max(tiny), self.b.1),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.c.0 < self.c.1 && self.a.0 < self.a.1 && self.b.0 < self.b.1)
    }
}

/// What the density engine needs from the input vector `(C, A, B)`: its joint
/// density and a bounding box for the integration domain.
pub trait JointDensity: Sync {
    fn joint_density(&self, c: f64, a: f64, b: f64) -> f64;

    /// Bounding box of the effective support for truncation parameter `k`.
    fn effective_box(&self, k: f64) -> InputBox;

    /// `∫∫ f(c, a, b) da db` over `a > 1, b > 0` when it is known in closed
    /// form. Lets the period-zero density skip the double integral.
    fn c_marginal(&self, _c: f64) -> Option<f64> {
        None
    }
}

/// Independent inputs `C`, `A`, `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointInputs {
    pub c: DistributionSpec,
    pub a: DistributionSpec,
    pub b: DistributionSpec,
}

impl JointInputs {
    pub fn new(c: DistributionSpec, a: DistributionSpec, b: DistributionSpec) -> Self {
        Self { c, a, b }
    }

    /// `P[A > 1, B > 0, C > 0]`.
    pub fn validity_mass(&self) -> f64 {
        self.a.sf(1.0) * self.b.sf(0.0) * self.c.sf(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64, f64) {
        let c = self.c.sample(rng);
        let a = self.a.sample(rng);
        let b = self.b.sample(rng);
        (c, a, b)
    }
}

impl JointDensity for JointInputs {
    fn joint_density(&self, c: f64, a: f64, b: f64) -> f64 {
        let fc = self.c.density(c);
        if fc == 0.0 {
            return 0.0;
        }
        let fa = self.a.density(a);
        if fa == 0.0 {
            return 0.0;
        }
        fc * fa * self.b.density(b)
    }

    fn effective_box(&self, k: f64) -> InputBox {
        InputBox {
            c: self.c.effective_support(k),
            a: self.a.effective_support(k),
            b: self.b.effective_support(k),
        }
    }

    fn c_marginal(&self, c: f64) -> Option<f64> {
        Some(self.c.density(c) * self.a.sf(1.0) * self.b.sf(0.0))
    }
}
