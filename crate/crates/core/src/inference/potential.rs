use serde::{Deserialize, Serialize};

use super::forward::ForwardModel;
use super::observation::ObservationSet;
use super::prior::PriorSpec;
use crate::error::{Error, Result};

/// Negative log posterior density in the exponent, up to a constant.
pub trait Potential: Sync {
    fn value(&self, gamma: f64) -> Result<f64>;

    fn support(&self) -> [f64; 2];
}

/// `V = 1/2 |y - M(gamma)|^2_Sigma + (gamma - m0)^2 / (2 sigma0^2)`.
#[derive(Debug)]
pub struct PosteriorPotential {
    pub forward: ForwardModel,
    pub obs: ObservationSet,
    pub prior: PriorSpec,
    /// Multiplies the data term; 0 leaves the prior alone.
    pub data_weight: f64,
}

impl PosteriorPotential {
    pub fn new(forward: ForwardModel, obs: ObservationSet, prior: PriorSpec) -> Result<Self> {
        prior.validate()?;
        obs.check_grid(forward.scenario().u0.spec())?;
        Ok(PosteriorPotential {
            forward,
            obs,
            prior,
            data_weight: 1.0,
        })
    }

    pub fn data_term(&self, gamma: f64) -> Result<f64> {
        if self.data_weight == 0.0 {
            return Ok(0.0);
        }
        let pred = self.forward.evaluate(gamma)?;
        Ok(0.5 * self.data_weight * self.obs.misfit(&pred)?)
    }
}

impl Potential for PosteriorPotential {
    fn value(&self, gamma: f64) -> Result<f64> {
        let prior = self.prior.potential(gamma);
        if !prior.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(self.data_term(gamma)? + prior)
    }

    fn support(&self) -> [f64; 2] {
        self.prior.support
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PriorPotential(pub PriorSpec);

impl Potential for PriorPotential {
    fn value(&self, gamma: f64) -> Result<f64> {
        Ok(self.0.potential(gamma))
    }

    fn support(&self) -> [f64; 2] {
        self.0.support
    }
}

/// Potential given by a closure, `+inf` outside `support`.
pub struct FnPotential<F> {
    pub f: F,
    pub support: [f64; 2],
}

impl<F: Fn(f64) -> f64 + Sync> Potential for FnPotential<F> {
    fn value(&self, gamma: f64) -> Result<f64> {
        if gamma < self.support[0] || gamma > self.support[1] {
            return Ok(f64::INFINITY);
        }
        Ok((self.f)(gamma))
    }

    fn support(&self) -> [f64; 2] {
        self.support
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub delta: f64,
    pub delta_min: f64,
    /// Required relative agreement between the `delta` and `delta/2` estimates.
    pub rel_agreement: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions {
            delta: 1e-2,
            delta_min: 1e-4,
            rel_agreement: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub value: f64,
    pub delta: f64,
    /// `|g(delta) - g(delta/2)| / max(|g(delta)|, |g(delta/2)|, 1)`.
    pub agreement: f64,
}

/// Central-difference gradient with the two-scale consistency rule: accept
/// once the estimates at `delta` and `delta/2` agree, otherwise halve `delta`
/// down to `delta_min`.
pub fn grad_potential(pot: &dyn Potential, gamma: f64, opts: &GradientOptions) -> Result<GradientEstimate> {
    let [lo, hi] = pot.support();
    let room = (gamma - lo).min(hi - gamma);
    let mut delta = opts.delta.min(room);
    if !(delta >= opts.delta_min) {
        return Err(Error::StepUnderflow {
            delta_min: opts.delta_min,
            agreement: f64::INFINITY,
        });
    }
    let central = |d: f64| -> Result<f64> { Ok((pot.value(gamma + d)? - pot.value(gamma - d)?) / (2.0 * d)) };
    let mut coarse = central(delta)?;
    let mut agreement = f64::INFINITY;
    while delta / 2.0 >= opts.delta_min {
        let fine = central(delta / 2.0)?;
        agreement = (coarse - fine).abs() / coarse.abs().max(fine.abs()).max(1.0);
        if agreement <= opts.rel_agreement {
            return Ok(GradientEstimate {
                value: fine,
                delta: delta / 2.0,
                agreement,
            });
        }
        delta /= 2.0;
        coarse = fine;
    }
    Err(Error::StepUnderflow {
        delta_min: opts.delta_min,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_gradient_is_exact() {
        let prior = PriorSpec::new(2.0, 0.3, [1.2, 3.0]).unwrap();
        let pot = PriorPotential(prior);
        for g in [1.5, 2.0, 2.7] {
            let est = grad_potential(&pot, g, &GradientOptions::default()).unwrap();
            assert!((est.value - prior.gradient(g)).abs() < 1e-8);
        }
    }

    #[test]
    fn underflow_on_kink() {
        let pot = FnPotential {
            f: |g: f64| 1e3 * (g - 2.0).abs().sqrt(),
            support: [1.5, 2.5],
        };
        let err = grad_potential(&pot, 2.0 + 1e-5, &GradientOptions::default()).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
        assert!(grad_potential(&pot, 1.50005, &GradientOptions::default()).is_err());
    }
}
