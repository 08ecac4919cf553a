use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian prior `N(m0, sigma0^2)` truncated to `support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub m0: f64,
    pub sigma0: f64,
    pub support: [f64; 2],
}

impl PriorSpec {
    pub fn new(m0: f64, sigma0: f64, support: [f64; 2]) -> Result<Self> {
        let p = PriorSpec { m0, sigma0, support };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m0.is_finite() {
            return Err(Error::input("prior mean must be finite"));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::input(format!("prior std must be > 0, got {}", self.sigma0)));
        }
        let [lo, hi] = self.support;
        if !(lo > 1.0 && hi > lo && hi.is_finite()) {
            return Err(Error::input(format!(
                "prior support must satisfy 1 < lo < hi < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.support[0] && gamma <= self.support[1]
    }

    /// `(gamma - m0)^2 / (2 sigma0^2)` inside the support, `+inf` outside.
    pub fn potential(&self, gamma: f64) -> f64 {
        if !self.contains(gamma) {
            return f64::INFINITY;
        }
        let z = (gamma - self.m0) / self.sigma0;
        0.5 * z * z
    }

    pub fn gradient(&self, gamma: f64) -> f64 {
        (gamma - self.m0) / (self.sigma0 * self.sigma0)
    }
}
