//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use pme_core::evolution::barenblatt;
use pme_core::field::{GridField, GridSpec, Window};
use pme_core::inference::{ChainConfig, GradientMode, GradientOptions, PriorSpec, SyntheticSpec};
use pme_core::model::{ConstitutiveModel, GrowthLaw, ModelSpec};
use pme_core::resolvent::ResolventConfig;
use pme_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub initial: InitialData,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub evolve: Option<EvolveSection>,
    #[serde(default)]
    pub certify: Option<CertifySection>,
    #[serde(default)]
    pub infer: Option<InferSection>,
    #[serde(default)]
    pub validate: Option<ValidateSection>,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

/// Initial datum on the configured grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant { value: f64 },
    /// `amplitude * max(0, 1 - |x|^2 / radius^2)`.
    Bump { amplitude: f64, radius: f64 },
    /// Indicator of `|x|_inf < half_width` times `value`.
    Box { value: f64, half_width: f64 },
    /// Source-type self-similar profile at time `t0`.
    Barenblatt { t0: f64, c: f64 },
    /// Field CSV written by `evolve`.
    Csv { path: PathBuf },
}

impl InitialData {
    pub fn build(&self, spec: GridSpec, gamma: f64, base: &Path) -> Result<GridField> {
        match self {
            InitialData::Zero => Ok(GridField::zeros(spec)),
            InitialData::Constant { value } => GridField::new(spec, vec![*value; spec.len()]),
            InitialData::Bump { amplitude, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Input("bump radius must be > 0".into()));
                }
                GridField::from_fn(spec, |x| {
                    amplitude * (1.0 - (x[0] * x[0] + x[1] * x[1]) / (radius * radius)).max(0.0)
                })
            }
            InitialData::Box { value, half_width } => {
                GridField::from_fn(spec, |x| if x[0].abs().max(x[1].abs()) < *half_width { *value } else { 0.0 })
            }
            InitialData::Barenblatt { t0, c } => {
                if !(*t0 > 0.0) {
                    return Err(Error::Input("barenblatt t0 must be > 0".into()));
                }
                GridField::from_fn(spec, |x| barenblatt(x[0] * x[0] + x[1] * x[1], *t0, *c, gamma, spec.dim))
            }
            InitialData::Csv { path } => GridField::load_csv(spec, base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub t_final: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub t: f64,
    pub n_list: Vec<usize>,
    /// Exponent pairs; the configured model supplies the growth law of both.
    pub pairs: Vec<[f64; 2]>,
    /// Growth law of the second problem, if different.
    #[serde(default)]
    pub growth2: Option<GrowthLaw>,
    /// Initial datum of the second problem, if different.
    #[serde(default)]
    pub initial2: Option<InitialData>,
    #[serde(default)]
    pub per_step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub n_samples: usize,
    #[serde(default)]
    pub burn_in: usize,
    /// Proposal std (MH) or step `h` (MALA) before tuning.
    pub step: f64,
    #[serde(default)]
    pub init: Option<f64>,
    #[serde(default = "default_true")]
    pub adapt: bool,
    #[serde(default)]
    pub target_acceptance: Option<f64>,
    #[serde(default)]
    pub gradient: GradientOptions,
    #[serde(default)]
    pub gradient_mode: GradientMode,
}

fn default_true() -> bool {
    true
}

impl SamplerSection {
    pub fn chain_config(&self, seed: u64, init: f64, default_target: f64) -> ChainConfig {
        ChainConfig {
            n_samples: self.n_samples,
            burn_in: self.burn_in,
            init: self.init.unwrap_or(init),
            step: self.step,
            adapt: self.adapt,
            target_acceptance: self.target_acceptance.unwrap_or(default_target),
            seed,
            gradient: self.gradient,
            gradient_mode: self.gradient_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferSection {
    pub t_final: f64,
    pub n_steps: usize,
    /// Flat `[lo, hi]` (or `[lo1, hi1, lo2, hi2]`) windows.
    pub windows: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub prior: PriorSpec,
    pub grid: GammaGrid,
    /// Histogram bins over `[grid.lo, grid.hi]`, centred on an evenly spaced
    /// coarse grid; defaults to one bin per quadrature node.
    #[serde(default)]
    pub bins: Option<usize>,
    /// Observation file; when absent, `synthetic` generates the data.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub mh: Option<SamplerSection>,
    #[serde(default)]
    pub mala: Option<SamplerSection>,
    #[serde(default)]
    pub tv_convergence: Option<Vec<usize>>,
    /// Drop the data term; the chains then sample the truncated prior.
    #[serde(default)]
    pub prior_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub gamma_star: f64,
    #[serde(default = "default_noise")]
    pub noise_fraction: f64,
    #[serde(default = "default_refine")]
    pub refine: usize,
}

fn default_noise() -> f64 {
    0.01
}

fn default_refine() -> usize {
    4
}

impl SyntheticSection {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            gamma_star: self.gamma_star,
            noise_fraction: self.noise_fraction,
            refine: self.refine,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default)]
    pub self_convergence: Option<SelfConvergenceSection>,
    #[serde(default)]
    pub barenblatt: Option<BarenblattSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfConvergenceSection {
    pub t: f64,
    pub n_list: Vec<usize>,
    /// Minimum fitted decay exponent for a pass.
    #[serde(default = "default_min_rate")]
    pub min_rate: f64,
}

fn default_min_rate() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarenblattSection {
    pub t0: f64,
    pub t1: f64,
    pub c: f64,
    /// `(points_per_axis, n_steps)` per refinement level.
    pub levels: Vec<[usize; 2]>,
}

/// Deliberate corruptions used by negative tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestHooks {
    /// Relative residual tolerance for the second certification trajectory.
    #[serde(default)]
    pub second_solver_tol: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<ConstitutiveModel> {
        self.model.clone().try_into()
    }

    /// Cross-field checks that must pass before any compute.
    pub fn validate_common(&self) -> Result<()> {
        self.grid.validate()?;
        let model = self.model()?;
        if let Some(e) = &self.evolve {
            let tau = e.t_final / e.n_steps.max(1) as f64;
            ResolventConfig { tau, ..self.resolvent.clone() }.validate(&model)?;
        }
        if let Some(c) = &self.certify {
            if c.pairs.is_empty() || c.n_list.is_empty() {
                return Err(Error::Input("certify needs at least one pair and one n".into()));
            }
            for [g1, g2] in &c.pairs {
                for g in [g1, g2] {
                    model.with_gamma(*g)?;
                }
            }
            for n in &c.n_list {
                let tau = c.t / *n as f64;
                let g0 = model.g0().max(c.growth2.map_or(0.0, |g| g.g0));
                if tau * g0 >= 1.0 {
                    return Err(Error::TauTooLarge(tau * g0));
                }
            }
        }
        if let Some(i) = &self.infer {
            i.prior.validate()?;
            let tau = i.t_final / i.n_steps.max(1) as f64;
            ResolventConfig { tau, ..self.resolvent.clone() }.validate(&model)?;
            for w in &i.windows {
                Window::from_flat(w)?.cell_ranges(&self.grid)?;
            }
            if i.observations.is_none() && i.synthetic.is_none() {
                return Err(Error::Input("infer needs `observations` or `synthetic`".into()));
            }
            if i.grid.points < 2 || !(i.grid.lo < i.grid.hi) || i.bins.is_some_and(|b| b < 2) {
                return Err(Error::Input("infer grid needs lo < hi and >= 2 points and bins".into()));
            }
        }
        Ok(())
    }
}
