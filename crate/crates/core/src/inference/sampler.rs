//! Random-walk Metropolis-Hastings and MALA chains for the scalar exponent.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::potential::{grad_potential, GradientEstimate, GradientOptions, Potential};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    FiniteDifference,
    /// Drift switched off; MALA becomes a random walk with variance `2h`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Mh,
    Mala,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub init: f64,
    /// Proposal std for MH, step `h` for MALA.
    pub step: f64,
    /// Tune `step` towards `target_acceptance` during burn-in.
    pub adapt: bool,
    pub target_acceptance: f64,
    pub seed: u64,
    pub gradient: GradientOptions,
    pub gradient_mode: GradientMode,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_samples: 1000,
            burn_in: 0,
            init: 2.0,
            step: 0.05,
            adapt: false,
            target_acceptance: 0.5,
            seed: 0,
            gradient: GradientOptions::default(),
            gradient_mode: GradientMode::FiniteDifference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub gamma: f64,
    pub v: f64,
    pub grad: Option<GradientEstimate>,
    pub accepted: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub step: usize,
    pub gamma: f64,
    pub v: f64,
    pub accepted: bool,
    /// Gradient at the current state (MALA only).
    pub grad: Option<f64>,
    pub grad_agreement: Option<f64>,
    /// The gradient was unavailable and a random-walk step was taken instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub kind: SamplerKind,
    /// Post-burn-in records.
    pub records: Vec<ChainRecord>,
    pub acceptance_rate: f64,
    pub burn_in_acceptance: f64,
    pub final_step: f64,
    pub fallbacks: usize,
    /// Set when a forward error stopped the chain early.
    pub aborted: Option<String>,
}

impl ChainResult {
    pub fn samples(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    /// Sample with the lowest potential.
    pub fn map_estimate(&self) -> Option<f64> {
        self.records
            .iter()
            .min_by(|a, b| a.v.total_cmp(&b.v))
            .map(|r| r.gamma)
    }

    /// Columns `step,gamma,V,accepted,gradV`; `gradV` is empty for MH.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "gamma", "V", "accepted", "gradV"])?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                r.gamma.to_string(),
                r.v.to_string(),
                (r.accepted as u8).to_string(),
                r.grad.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate(pot: &dyn Potential, cfg: &ChainConfig) -> Result<f64> {
    let [lo, hi] = pot.support();
    if !(cfg.init >= lo && cfg.init <= hi) {
        return Err(Error::input(format!("chain init {} outside support [{lo}, {hi}]", cfg.init)));
    }
    if !(cfg.step.is_finite() && cfg.step >= 0.0) {
        return Err(Error::input(format!("chain step must be >= 0, got {}", cfg.step)));
    }
    if !(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0) {
        return Err(Error::input("target acceptance must lie in (0, 1)"));
    }
    let v = pot.value(cfg.init)?;
    if !v.is_finite() {
        return Err(Error::input(format!("potential is not finite at init {}", cfg.init)));
    }
    Ok(v)
}

/// Robbins-Monro update of `log step` towards the target acceptance.
fn adapt(step: f64, alpha: f64, target: f64, k: usize) -> f64 {
    let rate = 1.0 / ((k + 1) as f64).powf(0.6);
    (step.ln() + rate * (alpha - target)).exp()
}

struct Tally {
    burn_accepts: usize,
    accepts: usize,
}

impl Tally {
    fn finish(&self, kind: SamplerKind, cfg: &ChainConfig, records: Vec<ChainRecord>, step: f64, fallbacks: usize, aborted: Option<String>) -> ChainResult {
        let kept = records.len();
        ChainResult {
            kind,
            records,
            acceptance_rate: if kept > 0 { self.accepts as f64 / kept as f64 } else { 0.0 },
            burn_in_acceptance: if cfg.burn_in > 0 {
                self.burn_accepts as f64 / cfg.burn_in as f64
            } else {
                0.0
            },
            final_step: step,
            fallbacks,
            aborted,
        }
    }
}

/// Random-walk Metropolis-Hastings with Gaussian proposals of std `cfg.step`.
pub fn mh_chain(pot: &dyn Potential, cfg: &ChainConfig) -> Result<ChainResult> {
    let v0 = validate(pot, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState {
        gamma: cfg.init,
        v: v0,
        grad: None,
        accepted: 0,
        step: cfg.step,
    };
    let mut tally = Tally { burn_accepts: 0, accepts: 0 };
    let mut records = Vec::with_capacity(cfg.n_samples);
    for k in 0..cfg.burn_in + cfg.n_samples {
        let xi: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let proposal = state.gamma + state.step * xi;
        let vp = match pot.value(proposal) {
            Ok(v) => v,
            Err(e) => return Ok(tally.finish(SamplerKind::Mh, cfg, records, state.step, 0, Some(e.to_string()))),
        };
        let alpha = if vp.is_finite() { (state.v - vp).exp().min(1.0) } else { 0.0 };
        let accepted = u < alpha;
        if accepted {
            state.gamma = proposal;
            state.v = vp;
            state.accepted += 1;
        }
        if k < cfg.burn_in {
            tally.burn_accepts += accepted as usize;
            if cfg.adapt && state.step > 0.0 {
                state.step = adapt(state.step, alpha, cfg.target_acceptance, k);
            }
        } else {
            tally.accepts += accepted as usize;
            records.push(ChainRecord {
                step: k - cfg.burn_in,
                gamma: state.gamma,
                v: state.v,
                accepted,
                grad: None,
                grad_agreement: None,
                fallback: false,
            });
        }
    }
    Ok(tally.finish(SamplerKind::Mh, cfg, records, state.step, 0, None))
}

fn gradient(pot: &dyn Potential, gamma: f64, cfg: &ChainConfig) -> Result<Option<GradientEstimate>> {
    match cfg.gradient_mode {
        GradientMode::Zero => Ok(Some(GradientEstimate {
            value: 0.0,
            delta: 0.0,
            agreement: 0.0,
        })),
        GradientMode::FiniteDifference => match grad_potential(pot, gamma, &cfg.gradient) {
            Ok(g) => Ok(Some(g)),
            Err(Error::StepUnderflow { .. }) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Log density of the Langevin proposal `to ~ N(from - h g, 2h)`, up to a constant.
fn log_q(to: f64, from: f64, grad_from: f64, h: f64) -> f64 {
    let d = to - from + h * grad_from;
    -d * d / (4.0 * h)
}

/// Metropolis-adjusted Langevin chain with step `h = cfg.step`:
/// `gamma' = gamma - h grad V(gamma) + sqrt(2h) xi`. When the gradient at the
/// current state is unavailable the step falls back to a random walk with the
/// same variance; when it is unavailable at the proposal the proposal is
/// rejected.
pub fn mala_chain(pot: &dyn Potential, cfg: &ChainConfig) -> Result<ChainResult> {
    let v0 = validate(pot, cfg)?;
    if cfg.step <= 0.0 {
        return Err(Error::input("MALA step h must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ChainState {
        gamma: cfg.init,
        v: v0,
        grad: gradient(pot, cfg.init, cfg)?,
        accepted: 0,
        step: cfg.step,
    };
    let mut tally = Tally { burn_accepts: 0, accepts: 0 };
    let mut fallbacks = 0;
    let mut records = Vec::with_capacity(cfg.n_samples);
    for k in 0..cfg.burn_in + cfg.n_samples {
        let xi: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let h = state.step;
        let fallback = state.grad.is_none();
        fallbacks += fallback as usize;
        let g = state.grad.map(|g| g.value).unwrap_or(0.0);
        let proposal = state.gamma - h * g + (2.0 * h).sqrt() * xi;
        let step_result = (|| -> Result<(f64, Option<GradientEstimate>)> {
            let vp = pot.value(proposal)?;
            if !vp.is_finite() {
                return Ok((vp, None));
            }
            Ok((vp, gradient(pot, proposal, cfg)?))
        })();
        let (vp, gp) = match step_result {
            Ok(x) => x,
            Err(e) => return Ok(tally.finish(SamplerKind::Mala, cfg, records, state.step, fallbacks, Some(e.to_string()))),
        };
        let alpha = match gp {
            Some(gp) if vp.is_finite() => {
                let log_ratio = if fallback {
                    state.v - vp
                } else {
                    state.v - vp + log_q(state.gamma, proposal, gp.value, h) - log_q(proposal, state.gamma, g, h)
                };
                log_ratio.exp().min(1.0)
            }
            _ => 0.0,
        };
        let accepted = u < alpha;
        if accepted {
            state.gamma = proposal;
            state.v = vp;
            state.grad = gp;
            state.accepted += 1;
        }
        if k < cfg.burn_in {
            tally.burn_accepts += accepted as usize;
            if cfg.adapt {
                state.step = adapt(state.step, alpha, cfg.target_acceptance, k);
            }
        } else {
            tally.accepts += accepted as usize;
            records.push(ChainRecord {
                step: k - cfg.burn_in,
                gamma: state.gamma,
                v: state.v,
                accepted,
                grad: state.grad.map(|g| g.value),
                grad_agreement: state.grad.map(|g| g.agreement),
                fallback,
            });
        }
    }
    Ok(tally.finish(SamplerKind::Mala, cfg, records, state.step, fallbacks, None))
}

/// Metropolis acceptance probability for a symmetric proposal.
pub fn mh_acceptance(v_from: f64, v_to: f64) -> f64 {
    if v_to.is_finite() {
        (v_from - v_to).exp().min(1.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::diagnostics::{ess_geyer, ks_distance};
    use crate::inference::potential::{FnPotential, PriorPotential};
    use crate::inference::prior::PriorSpec;

    fn gaussian(m: f64, s: f64) -> FnPotential<impl Fn(f64) -> f64 + Sync> {
        FnPotential {
            f: move |g: f64| 0.5 * ((g - m) / s).powi(2),
            support: [m - 20.0 * s, m + 20.0 * s],
        }
    }

    #[test]
    fn zero_step_keeps_chain_constant() {
        let pot = gaussian(2.0, 0.1);
        let cfg = ChainConfig {
            n_samples: 100,
            step: 0.0,
            init: 2.05,
            ..Default::default()
        };
        let c = mh_chain(&pot, &cfg).unwrap();
        assert!(c.samples().iter().all(|g| *g == 2.05));
    }

    #[test]
    fn detailed_balance_ratio() {
        let pot = gaussian(2.0, 0.1);
        for (a, b) in [(1.9, 2.05), (2.2, 2.0), (2.0, 2.0)] {
            let (va, vb) = (pot.value(a).unwrap(), pot.value(b).unwrap());
            let ratio = mh_acceptance(va, vb) / mh_acceptance(vb, va);
            assert!((ratio - (va - vb).exp()).abs() < 1e-14 * ratio.max(1.0));
        }
    }

    #[test]
    fn seeded_chains_are_reproducible() {
        let pot = gaussian(2.0, 0.1);
        let cfg = ChainConfig {
            n_samples: 500,
            step: 0.1,
            seed: 7,
            ..Default::default()
        };
        assert_eq!(mh_chain(&pot, &cfg).unwrap(), mh_chain(&pot, &cfg).unwrap());
        let cfg = ChainConfig { step: 0.005, ..cfg };
        assert_eq!(mala_chain(&pot, &cfg).unwrap(), mala_chain(&pot, &cfg).unwrap());
    }

    #[test]
    fn mh_prior_mean() {
        let prior = PriorSpec::new(2.0, 0.2, [1.01, 4.0]).unwrap();
        let cfg = ChainConfig {
            n_samples: 20_000,
            burn_in: 1000,
            step: 0.3,
            seed: 3,
            ..Default::default()
        };
        let c = mh_chain(&PriorPotential(prior), &cfg).unwrap();
        let s = c.samples();
        let ess = ess_geyer(&s);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 2.0).abs() < 3.0 * 0.2 / ess.sqrt(), "{mean} ess {ess}");
    }

    #[test]
    fn mala_prior_moments() {
        let prior = PriorSpec::new(2.0, 0.2, [1.01, 4.0]).unwrap();
        let cfg = ChainConfig {
            n_samples: 20_000,
            burn_in: 2000,
            step: 0.02,
            adapt: true,
            target_acceptance: 0.574,
            seed: 11,
            ..Default::default()
        };
        let c = mala_chain(&PriorPotential(prior), &cfg).unwrap();
        let s = c.samples();
        assert!(ess_geyer(&s) >= 1000.0);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 2.0).abs() < 0.05 * 0.2 * 3.0);
        assert!((var / 0.04 - 1.0).abs() < 0.05, "var {var}");
        assert!(c.records.iter().filter(|r| r.accepted).all(|r| r.grad_agreement.unwrap() <= 0.01));
    }

    #[test]
    fn flat_gradient_mala_matches_random_walk() {
        let pot = gaussian(2.0, 0.1);
        let h = 0.01;
        let mala = mala_chain(
            &pot,
            &ChainConfig {
                n_samples: 10_000,
                burn_in: 500,
                step: h,
                seed: 5,
                gradient_mode: GradientMode::Zero,
                ..Default::default()
            },
        )
        .unwrap();
        let mh = mh_chain(
            &pot,
            &ChainConfig {
                n_samples: 10_000,
                burn_in: 500,
                step: (2.0 * h).sqrt(),
                seed: 6,
                ..Default::default()
            },
        )
        .unwrap();
        let d = ks_distance(&mala.samples(), &mh.samples());
        assert!(d < 0.05, "KS {d}");
    }

    #[test]
    fn chain_csv_layout() {
        let pot = gaussian(2.0, 0.1);
        let c = mh_chain(&pot, &ChainConfig { n_samples: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,gamma,V,accepted,gradV\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
