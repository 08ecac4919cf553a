//! Bayesian inversion for the exponent `gamma` from windowed mass data.

pub mod diagnostics;
pub mod forward;
pub mod observation;
pub mod potential;
pub mod prior;
pub mod quadrature;
pub mod sampler;
pub mod synthetic;

pub use diagnostics::{ess_geyer, ks_distance};
pub use forward::{ForwardCache, ForwardModel, Scenario};
pub use observation::{ObservationFile, ObservationSet};
pub use potential::{grad_potential, FnPotential, GradientEstimate, GradientOptions, PosteriorPotential, Potential, PriorPotential};
pub use prior::PriorSpec;
pub use quadrature::{
    bin_edges, gamma_grid, histogram_on_grid, histogram_with_edges, posterior_from_potentials, posterior_tv_convergence, quadrature_posterior, tv_distance,
    Histogram, PosteriorSummary, QuadraturePosterior,
};
pub use sampler::{mala_chain, mh_chain, ChainConfig, ChainResult, GradientMode, SamplerKind};
pub use synthetic::{synthetic_observations, SyntheticSpec};
