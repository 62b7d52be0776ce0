//! Exponentially modified Gaussian (ex-Gaussian) response-time density.
//!
//! With `z = sigma / (sqrt(2) tau) - (x - mu) / (sqrt(2) sigma)` the density is
//!
//! ```text
//! f(x) = 1/(2 tau) * exp(sigma^2 / (2 tau^2) - (x - mu) / tau) * erfc(z)
//! ```
//!
//! For `z >= 0` the exponential factor can overflow while `erfc(z)`
//! underflows. There we use `erfc(z) = erfcx(z) * exp(-z^2)`, which collapses
//! the exponent to `-(x - mu)^2 / (2 sigma^2)`. For `z < 0` the direct form
//! has a non-positive exponent and `erfc(z)` lies in `(1, 2]`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// From here on erfcx comes from its continued fraction; below it
/// `exp(x^2) * erfc(x)` loses at most a few ulps.
const ERFCX_FRACTION_CUTOFF: f64 = 2.0;
const ERFCX_FRACTION_TERMS: u32 = 120;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid ex-Gaussian parameters: {field} = {value}")]
pub struct ParamDomainError {
    pub field: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExGaussianParams {
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl ExGaussianParams {
    pub fn new(mu: f64, sigma: f64, tau: f64) -> Result<Self, ParamDomainError> {
        let p = Self { mu, sigma, tau };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), ParamDomainError> {
        if !self.mu.is_finite() {
            return Err(ParamDomainError {
                field: "mu",
                value: self.mu,
            });
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ParamDomainError {
                field: "sigma",
                value: self.sigma,
            });
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ParamDomainError {
                field: "tau",
                value: self.tau,
            });
        }
        Ok(())
    }

    /// Distribution mean, `mu + tau`.
    pub fn mean(&self) -> f64 {
        self.mu + self.tau
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.tau * self.tau
    }

    pub fn pdf(&self, x: f64) -> Result<f64, ParamDomainError> {
        exgauss_pdf(x, self)
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64, ParamDomainError> {
        exgauss_log_pdf(x, self)
    }

    /// P(X > x).
    pub fn sf(&self, x: f64) -> Result<f64, ParamDomainError> {
        exgauss_sf(x, self)
    }

    /// Log density of the distribution conditioned on a positive value,
    /// the law of [`Self::sample_positive`].
    pub fn log_pdf_positive(&self, x: f64) -> Result<f64, ParamDomainError> {
        if x <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_pdf(x)? - self.sf(0.0)?.ln())
    }

    /// One draw from the untruncated distribution (Gaussian plus exponential).
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = Normal::new(self.mu, self.sigma).expect("validated sigma");
        let exp = Exp::new(1.0 / self.tau).expect("validated tau");
        normal.sample(rng) + exp.sample(rng)
    }

    /// Draw restricted to the positive half-line by rejection.
    pub fn sample_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.sample_raw(rng);
            if x > 0.0 {
                return x;
            }
        }
    }
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(-x) = 2 - erfc(x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < ERFCX_FRACTION_CUTOFF {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction
    // erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    // evaluated bottom-up.
    let mut tail = x;
    for k in (1..=ERFCX_FRACTION_TERMS).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    FRAC_1_SQRT_PI / tail
}

#[inline]
fn erfc_argument(x: f64, p: &ExGaussianParams) -> f64 {
    let d = x - p.mu;
    (p.sigma / p.tau - d / p.sigma) * std::f64::consts::FRAC_1_SQRT_2
}

/// Density of the ex-Gaussian at `x` (1/seconds).
pub fn exgauss_pdf(x: f64, p: &ExGaussianParams) -> Result<f64, ParamDomainError> {
    p.check()?;
    let d = x - p.mu;
    let z = erfc_argument(x, p);
    let half_inv_tau = 0.5 / p.tau;
    let f = if z >= 0.0 {
        half_inv_tau * (-(d * d) / (2.0 * p.sigma * p.sigma)).exp() * erfcx(z)
    } else {
        let r = p.sigma / p.tau;
        half_inv_tau * (0.5 * r * r - d / p.tau).exp() * erfc(z)
    };
    Ok(f)
}

/// Survival function `P(X > x)`. Both terms are non-negative, and the
/// exponential tail is folded into `erfcx` so it cannot overflow.
pub fn exgauss_sf(x: f64, p: &ExGaussianParams) -> Result<f64, ParamDomainError> {
    p.check()?;
    let u = (x - p.mu) / p.sigma;
    let r = p.sigma / p.tau;
    let v = u - r;
    let gauss = 0.5 * erfc(u * std::f64::consts::FRAC_1_SQRT_2);
    let tail = if v < 0.0 {
        0.5 * erfcx(-v * std::f64::consts::FRAC_1_SQRT_2) * (-0.5 * u * u).exp()
    } else {
        (r * (0.5 * r - u)).exp() * 0.5 * erfc(-v * std::f64::consts::FRAC_1_SQRT_2)
    };
    Ok((gauss + tail).min(1.0))
}

/// Natural log of the ex-Gaussian density, finite wherever the density is
/// positive in exact arithmetic.
pub fn exgauss_log_pdf(x: f64, p: &ExGaussianParams) -> Result<f64, ParamDomainError> {
    p.check()?;
    let d = x - p.mu;
    let z = erfc_argument(x, p);
    let log_half_inv_tau = -(2.0 * p.tau).ln();
    let lf = if z >= 0.0 {
        log_half_inv_tau - (d * d) / (2.0 * p.sigma * p.sigma) + erfcx(z).ln()
    } else {
        let r = p.sigma / p.tau;
        log_half_inv_tau + 0.5 * r * r - d / p.tau + erfc(z).ln()
    };
    Ok(lf)
}
