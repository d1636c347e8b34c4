use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|xi|` the exponential limit is used.
pub const XI_ZERO: f64 = 1e-8;

/// A univariate distribution with a quantile function.
pub trait Distribution {
    fn cdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> Result<f64>;
}

/// `W_{xi,u,sigma}(x) = 1 - (1 + xi (x - u) / sigma)^(-1/xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub u: f64,
    pub sigma: f64,
}

/// Standard quantile `W^-1_{xi,0,1}(p) = ((1 - p)^(-xi) - 1) / xi`,
/// `-ln(1 - p)` in the exponential limit.
pub fn standard_quantile(xi: f64, p: f64) -> f64 {
    let log_tail = (-p).ln_1p();
    if xi.abs() < XI_ZERO {
        -log_tail
    } else {
        (-xi * log_tail).exp_m1() / xi
    }
}

impl GpdParams {
    pub fn new(xi: f64, u: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !xi.is_finite() || !u.is_finite() {
            return Err(Error::invalid(format!(
                "GPD needs finite xi, u and sigma > 0, got xi={xi}, u={u}, sigma={sigma}"
            )));
        }
        Ok(Self { xi, u, sigma })
    }

    /// Right end of the support; infinite unless `xi < 0`.
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && self.xi.abs() >= XI_ZERO {
            self.u - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.u {
            return 0.0;
        }
        let z = (x - self.u) / self.sigma;
        if self.xi.abs() < XI_ZERO {
            return (-z).exp() / self.sigma;
        }
        let t = 1.0 + self.xi * z;
        if t <= 0.0 {
            return 0.0;
        }
        (-(1.0 / self.xi + 1.0) * t.ln()).exp() / self.sigma
    }

    /// Whether the `k`-th moment is finite (`k < 1/xi` for `xi > 0`).
    pub fn moment_is_finite(&self, k: f64) -> bool {
        self.xi <= 0.0 || k * self.xi < 1.0
    }

    /// `n` draws by inversion of uniforms.
    pub fn sample<R: RngCore>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let p = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                self.u + self.sigma * standard_quantile(self.xi, p)
            })
            .collect()
    }
}

impl Distribution for GpdParams {
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.u {
            return 0.0;
        }
        let z = (x - self.u) / self.sigma;
        if self.xi.abs() < XI_ZERO {
            return -(-z).exp_m1();
        }
        let t = self.xi * z;
        if t <= -1.0 {
            return 1.0;
        }
        -(-t.ln_1p() / self.xi).exp_m1()
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        if p == 1.0 {
            return match self.upper_endpoint() {
                e if e.is_finite() => Ok(e),
                _ => Err(Error::UnboundedQuantile(p)),
            };
        }
        Ok(self.u + self.sigma * standard_quantile(self.xi, p))
    }
}
