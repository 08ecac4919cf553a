use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::forward::Scenario;
use super::observation::ObservationSet;
use crate::error::{Error, Result};
use crate::field::Window;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub gamma_star: f64,
    /// Noise std as a fraction of the noiseless signal range.
    pub noise_fraction: f64,
    /// The generator uses `refine` times more steps than the scenario.
    pub refine: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            gamma_star: 2.0,
            noise_fraction: 0.01,
            refine: 4,
            seed: 0,
        }
    }
}

/// Noisy observations of `gamma_star` generated on a refined time grid.
pub fn synthetic_observations(
    scenario: &Scenario,
    windows: Vec<Window>,
    times: Vec<f64>,
    spec: &SyntheticSpec,
) -> Result<ObservationSet> {
    if spec.refine == 0 || !(spec.noise_fraction > 0.0) {
        return Err(Error::input("synthetic data need refine >= 1 and noise_fraction > 0"));
    }
    let fine = scenario.with_steps(scenario.n_steps * spec.refine);
    let clean = fine.observe(spec.gamma_star, &windows, &times)?;
    let (lo, hi) = clean
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let mut scale = hi - lo;
    if scale <= 0.0 {
        scale = hi.abs().max(1.0);
    }
    let std = spec.noise_fraction * scale;
    let normal = Normal::new(0.0, std).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let y = clean.iter().map(|c| c + normal.sample(&mut rng)).collect();
    ObservationSet::with_iid_noise(windows, times, y, std)
}
