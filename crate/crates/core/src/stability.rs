//! Explicit L1 stability bounds between two problems with different
//! constitutive laws, and certification of computed trajectories against them.
//!
//! Three bounds are available. [`bound_general`] is the continuous-time
//! estimate with sampled suprema, [`bound_discrete`] its counterpart for `n`
//! implicit steps of size `tau`, and [`bound_powerlaw`] the fully explicit
//! power-law version built from closed-form suprema.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::checksum::hash_json;
use crate::error::{Error, Result};
use crate::evolution::{evolve_with, EvolutionConfig};
use crate::exec::Exec;
use crate::field::GridField;
use crate::model::{growth_gap_on_half_line, sampled_sup, ConstitutiveModel, GrowthLaw};
use crate::resolvent::ResolventConfig;

/// Value ranges entering the suprema. Pressure intervals are stored as the
/// hull of the pressure image, which always starts at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub i_t: [f64; 2],
    pub i_p1: [f64; 2],
    pub i_p12: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupValues {
    pub sqrt_phi_prime: f64,
    pub pressure: f64,
    pub growth_prime: f64,
    pub growth_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub l1_difference: f64,
    pub tv: f64,
    pub l1: f64,
    pub linf_pos: f64,
    pub linf_neg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    /// Multiplies the initial-data term.
    pub initial: f64,
    /// Multiplies the three constitutive terms.
    pub other: f64,
    /// Stretch of the upper end of the value interval.
    pub interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityBreakdown {
    pub term_initial: f64,
    pub term_diffusion: f64,
    pub term_pressure: f64,
    pub term_growthlaw: f64,
    pub total: f64,
    pub empirical_gap: Option<f64>,
    pub certified: Option<bool>,
    pub t: f64,
    pub dim: usize,
    pub g0: f64,
    pub factors: Factors,
    pub intervals: IntervalSet,
    pub sups: SupValues,
    pub norms: DataNorms,
}

impl StabilityBreakdown {
    pub fn slack(&self) -> f64 {
        certification_slack(self.total)
    }

    /// Attaches an empirical gap and sets the verdict.
    pub fn with_gap(mut self, gap: f64) -> Self {
        self.empirical_gap = Some(gap);
        self.certified = Some(gap <= self.total + self.slack());
        self
    }

    fn assemble(t: f64, dim: usize, g0: f64, factors: Factors, intervals: IntervalSet, sups: SupValues, norms: DataNorms) -> Self {
        let term_initial = factors.initial * norms.l1_difference;
        let term_diffusion = 4.0 * (dim as f64 * t).sqrt() * factors.other * norms.tv * sups.sqrt_phi_prime;
        let term_pressure = t * factors.other * sups.growth_prime * sups.pressure * norms.l1;
        let term_growthlaw = t * factors.other * sups.growth_gap * norms.l1;
        StabilityBreakdown {
            term_initial,
            term_diffusion,
            term_pressure,
            term_growthlaw,
            total: term_initial + term_diffusion + term_pressure + term_growthlaw,
            empirical_gap: None,
            certified: None,
            t,
            dim,
            g0,
            factors,
            intervals,
            sups,
            norms,
        }
    }
}

/// Additive slack `1e-8 (1 + bound)` absorbing solver tolerances.
pub fn certification_slack(bound: f64) -> f64 {
    1e-8 * (1.0 + bound)
}

fn data_norms(u01: &GridField, u02: &GridField) -> Result<DataNorms> {
    let (linf_pos, linf_neg) = u01.pos_neg_linf();
    let norms = DataNorms {
        l1_difference: u01.l1_distance(u02)?,
        tv: u01.tv_norm(),
        l1: u01.l1_norm(),
        linf_pos,
        linf_neg,
    };
    if ![norms.l1_difference, norms.tv, norms.l1].iter().all(|x| x.is_finite()) {
        return Err(Error::input("non-finite norm of the initial data"));
    }
    Ok(norms)
}

fn shared_g0(m1: &ConstitutiveModel, m2: &ConstitutiveModel) -> f64 {
    m1.g0().max(m2.g0())
}

fn sampled_bound(
    u01: &GridField,
    u02: &GridField,
    m1: &ConstitutiveModel,
    m2: &ConstitutiveModel,
    t: f64,
    factors: Factors,
) -> Result<StabilityBreakdown> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::input(format!("t must be > 0, got {t}")));
    }
    let norms = data_norms(u01, u02)?;
    let upper = factors.interval * norms.linf_pos;
    // phi' and p are even, so their suprema over [-a, b] live on [0, max(a, b)].
    let reach = upper.max(norms.linf_neg);
    let p1 = m1.pressure(reach);
    let p12 = p1.max(m2.pressure(reach));
    let intervals = IntervalSet {
        i_t: [-norms.linf_neg, upper],
        i_p1: [0.0, p1],
        i_p12: [0.0, p12],
    };
    let sups = SupValues {
        sqrt_phi_prime: sampled_sup(0.0, reach, |s| m1.phi_prime(s).sqrt() - m2.phi_prime(s).sqrt())?.value,
        pressure: sampled_sup(0.0, reach, |s| m2.pressure(s) - m1.pressure(s))?.value,
        growth_prime: m2.growth.sup_abs_derivative(0.0, p12),
        growth_gap: sampled_sup(0.0, p1, |p| m2.growth.value(p) - m1.growth.value(p))?.value,
    };
    Ok(StabilityBreakdown::assemble(t, u01.spec().dim, shared_g0(m1, m2), factors, intervals, sups, norms))
}

/// Continuous-time bound at time `t`.
pub fn bound_general(
    u01: &GridField,
    u02: &GridField,
    m1: &ConstitutiveModel,
    m2: &ConstitutiveModel,
    t: f64,
) -> Result<StabilityBreakdown> {
    let e = (t * shared_g0(m1, m2)).exp();
    sampled_bound(u01, u02, m1, m2, t, Factors { initial: e, other: e, interval: e })
}

/// Bound after `n` implicit steps of size `tau`. The amplification
/// `(1 - tau G(0))^{-n}` replaces `e^{t G(0)}` on the initial term and the
/// value interval, `(1 - tau G(0))^{-(n+1)}` on the other three terms.
pub fn bound_discrete(
    u01: &GridField,
    u02: &GridField,
    m1: &ConstitutiveModel,
    m2: &ConstitutiveModel,
    n: usize,
    tau: f64,
) -> Result<StabilityBreakdown> {
    if n == 0 {
        return Err(Error::input("n must be >= 1"));
    }
    let tg = tau * shared_g0(m1, m2);
    if tg >= 1.0 {
        return Err(Error::TauTooLarge(tg));
    }
    let base = 1.0 / (1.0 - tg);
    let initial = base.powi(n as i32);
    let factors = Factors {
        initial,
        other: initial * base,
        interval: initial,
    };
    sampled_bound(u01, u02, m1, m2, n as f64 * tau, factors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBoundInputs {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `e^{t G(0)} ||u0_1||_inf`.
    pub m: f64,
    pub t: f64,
    pub dim: usize,
    pub g0: f64,
    /// Set when the caller's pair was reordered to get `gamma1 <= gamma2`.
    pub swapped: bool,
}

impl GammaBoundInputs {
    pub fn new(gamma1: f64, gamma2: f64, m: f64, t: f64, dim: usize, g0: f64) -> Result<Self> {
        if !(gamma1 > 1.0 && gamma2 > 1.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(Error::input(format!("exponents must be > 1, got {gamma1} and {gamma2}")));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::input(format!("M must be finite and >= 0, got {m}")));
        }
        let swapped = gamma1 > gamma2;
        let (gamma1, gamma2) = if swapped { (gamma2, gamma1) } else { (gamma1, gamma2) };
        Ok(GammaBoundInputs { gamma1, gamma2, m, t, dim, g0, swapped })
    }

    /// Inputs for the pair `(u01, m1)`, `(u02, m2)`; after a swap `M` is
    /// taken from `u02`.
    pub fn from_data(u01: &GridField, u02: &GridField, m1: &ConstitutiveModel, m2: &ConstitutiveModel, t: f64) -> Result<Self> {
        let g0 = shared_g0(m1, m2);
        let first = if m1.gamma() > m2.gamma() { u02 } else { u01 };
        let m = (t * g0).exp() * first.linf_norm();
        GammaBoundInputs::new(m1.gamma(), m2.gamma(), m, t, u01.spec().dim, g0)
    }

    fn ordered(gamma1: f64, gamma2: f64) -> Result<(f64, f64)> {
        if gamma1 > gamma2 || gamma1 <= 1.0 {
            return Err(Error::input(format!("need 1 < gamma1 <= gamma2, got {gamma1}, {gamma2}")));
        }
        Ok((gamma1, gamma2))
    }
}

/// `m^a |ln m|`, continuous at `m = 0`.
fn pow_log(m: f64, a: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m.powf(a) * m.ln().abs()
    }
}

/// Closed-form upper bound of `sup_{[0, M]} |sqrt(phi1') - sqrt(phi2')|`.
pub fn sup_sqrtphi_closed(inputs: &GammaBoundInputs) -> Result<f64> {
    let (g1, g2) = GammaBoundInputs::ordered(inputs.gamma1, inputs.gamma2)?;
    let m = inputs.m;
    Ok((g2 - g1)
        * (g1.sqrt() / (g2 - 1.0)
            + m.powf((g1 - 1.0) / 2.0) / (g2.sqrt() + g1.sqrt())
            + g2.sqrt() * pow_log(m, (g2 - 1.0) / 2.0) / 2.0))
}

/// Closed-form upper bound of `sup_{[0, M]} |p2 - p1|`.
pub fn sup_pressure_closed(inputs: &GammaBoundInputs) -> Result<f64> {
    let (g1, g2) = GammaBoundInputs::ordered(inputs.gamma1, inputs.gamma2)?;
    let m = inputs.m;
    let denom = (g2 - 1.0) * (g1 - 1.0);
    Ok((g2 - g1) * (g1 / denom + m.powf(g1 - 1.0) / denom + g2 / (g2 - 1.0) * pow_log(m, g2 - 1.0)))
}

/// `Upsilon^{(gamma1 - 1)/(gamma2 - gamma1)}` with
/// `Upsilon = sqrt(gamma1)(gamma1 - 1) / (sqrt(gamma2)(gamma2 - 1))`.
pub fn upsilon_check(gamma1: f64, gamma2: f64) -> Result<f64> {
    if !(gamma1 > 1.0 && gamma2 > gamma1) {
        return Err(Error::input(format!("need 1 < gamma1 < gamma2, got {gamma1}, {gamma2}")));
    }
    let ln_upsilon = 0.5 * (gamma1 / gamma2).ln() + ((gamma1 - 1.0) / (gamma2 - 1.0)).ln();
    Ok(((gamma1 - 1.0) / (gamma2 - gamma1) * ln_upsilon).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawBound {
    pub corollary: StabilityBreakdown,
    /// The continuous bound with sampled suprema, for the same ordered pair.
    pub sampled: StabilityBreakdown,
    /// Closed-form suprema and total are no smaller than the sampled ones.
    pub closed_dominates_sampled: bool,
    pub swapped: bool,
}

/// The explicit power-law bound. Growth laws and data are taken in the
/// caller's order and reordered together with the exponents.
pub fn bound_powerlaw(
    u01: &GridField,
    u02: &GridField,
    inputs: &GammaBoundInputs,
    growth: (&GrowthLaw, &GrowthLaw),
) -> Result<PowerLawBound> {
    let (u01, u02, g1, g2) = if inputs.swapped {
        (u02, u01, growth.1, growth.0)
    } else {
        (u01, u02, growth.0, growth.1)
    };
    for (i, u) in [u01, u02].iter().enumerate() {
        if u.values().iter().any(|v| *v < 0.0) {
            return Err(Error::Hypothesis(format!("initial datum {} has negative cells", i + 1)));
        }
    }
    if !(inputs.t.is_finite() && inputs.t > 0.0) {
        return Err(Error::input(format!("t must be > 0, got {}", inputs.t)));
    }
    let m1 = ConstitutiveModel::new(inputs.gamma1, *g1)?;
    let m2 = ConstitutiveModel::new(inputs.gamma2, *g2)?;
    let g0 = shared_g0(&m1, &m2);
    let e = (inputs.t * g0).exp();
    let norms = data_norms(u01, u02)?;
    let sups = SupValues {
        sqrt_phi_prime: sup_sqrtphi_closed(inputs)?,
        pressure: sup_pressure_closed(inputs)?,
        growth_prime: g2.sup_abs_derivative(0.0, f64::INFINITY),
        growth_gap: growth_gap_on_half_line(g1, g2)?.value,
    };
    // The growth terms use suprema over all p >= 0; the pressure hulls of
    // [0, M] are kept for reporting only.
    let intervals = IntervalSet {
        i_t: [0.0, inputs.m],
        i_p1: [0.0, m1.pressure(inputs.m)],
        i_p12: [0.0, m1.pressure(inputs.m).max(m2.pressure(inputs.m))],
    };
    let corollary = StabilityBreakdown::assemble(
        inputs.t,
        inputs.dim,
        g0,
        Factors { initial: e, other: e, interval: e },
        intervals,
        sups,
        norms,
    );
    let sampled = bound_general(u01, u02, &m1, &m2, inputs.t)?;
    let tol = 1e-9;
    let closed_dominates_sampled = corollary.sups.sqrt_phi_prime >= sampled.sups.sqrt_phi_prime - tol
        && corollary.sups.pressure >= sampled.sups.pressure - tol
        && corollary.total >= sampled.total - tol;
    Ok(PowerLawBound {
        corollary,
        sampled,
        closed_dominates_sampled,
        swapped: inputs.swapped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub t: f64,
    pub n: usize,
    pub resolvent: ResolventConfig,
    /// Solver settings for the second trajectory; defaults to `resolvent`.
    pub second_resolvent: Option<ResolventConfig>,
    /// Also check the discrete bound after every step.
    pub per_step: bool,
}

impl CertifyOptions {
    pub fn new(t: f64, n: usize) -> Self {
        CertifyOptions {
            t,
            n,
            resolvent: ResolventConfig::default(),
            second_resolvent: None,
            per_step: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub inputs_hash: String,
    pub gamma1: f64,
    pub gamma2: f64,
    pub t: f64,
    pub n: usize,
    pub tau: f64,
    pub empirical_gap: f64,
    pub discrete: StabilityBreakdown,
    pub general: StabilityBreakdown,
    /// Present when both data are nonnegative and unregularised.
    pub corollary: Option<PowerLawBound>,
    pub certified: bool,
    /// `general total <= discrete total`.
    pub general_below_discrete: bool,
    pub discrete_below_corollary: Option<bool>,
    /// Steps where the per-step discrete bound failed (when requested).
    pub step_violations: Vec<usize>,
}

/// Runs both discrete trajectories with shared `(tau, n)` and compares the
/// final L1 gap with the bounds.
pub fn certify(
    u01: &GridField,
    u02: &GridField,
    m1: &ConstitutiveModel,
    m2: &ConstitutiveModel,
    opts: &CertifyOptions,
    exec: Exec,
) -> Result<Certificate> {
    u01.ensure_same_grid(u02)?;
    let cfg1 = EvolutionConfig {
        resolvent: opts.resolvent.clone(),
        snapshot_times: Vec::new(),
        ..EvolutionConfig::new(opts.t, opts.n)
    };
    let cfg2 = EvolutionConfig {
        resolvent: opts.second_resolvent.clone().unwrap_or_else(|| opts.resolvent.clone()),
        ..cfg1.clone()
    };
    let run = |u0: &GridField, m: &ConstitutiveModel, cfg: &EvolutionConfig| -> Result<Vec<GridField>> {
        let mut states = Vec::new();
        let tr = evolve_with(u0, m, cfg, |_, u| {
            if opts.per_step {
                states.push(u.clone());
            }
            Ok(())
        })?;
        if !opts.per_step {
            states.push(tr.final_state().clone());
        }
        Ok(states)
    };
    let (s1, s2) = exec.join(|| run(u01, m1, &cfg1), || run(u02, m2, &cfg2));
    let (s1, s2) = (s1?, s2?);
    let tau = cfg1.tau();
    let gap = s1.last().expect("nonempty").l1_distance(s2.last().expect("nonempty"))?;

    let mut step_violations = Vec::new();
    if opts.per_step {
        let steps: Vec<usize> = (1..=opts.n).collect();
        let verdicts = exec.try_map(&steps, |k| -> Result<bool> {
            let b = bound_discrete(u01, u02, m1, m2, *k, tau)?;
            let g = s1[*k].l1_distance(&s2[*k])?;
            Ok(g <= b.total + b.slack())
        })?;
        step_violations = steps.iter().zip(verdicts).filter(|(_, ok)| !ok).map(|(k, _)| *k).collect();
    }

    let discrete = bound_discrete(u01, u02, m1, m2, opts.n, tau)?.with_gap(gap);
    let general = bound_general(u01, u02, m1, m2, opts.t)?.with_gap(gap);
    let nonneg = u01.values().iter().chain(u02.values()).all(|v| *v >= 0.0);
    let corollary = if nonneg && m1.reg.epsilon == 0.0 && m2.reg.epsilon == 0.0 {
        let inputs = GammaBoundInputs::from_data(u01, u02, m1, m2, opts.t)?;
        let mut pl = bound_powerlaw(u01, u02, &inputs, (&m1.growth, &m2.growth))?;
        pl.corollary = pl.corollary.with_gap(gap);
        Some(pl)
    } else {
        None
    };
    let discrete_below_corollary = corollary
        .as_ref()
        .map(|c| discrete.total <= c.corollary.total + certification_slack(c.corollary.total));
    let inputs_hash = hash_json(&(
        opts,
        crate::model::ModelSpec::from(*m1),
        crate::model::ModelSpec::from(*m2),
        u01,
        u02,
    ))?;
    Ok(Certificate {
        inputs_hash,
        gamma1: m1.gamma(),
        gamma2: m2.gamma(),
        t: opts.t,
        n: opts.n,
        tau,
        empirical_gap: gap,
        certified: discrete.certified == Some(true) && step_violations.is_empty(),
        general_below_discrete: general.total <= discrete.total + certification_slack(discrete.total),
        discrete,
        general,
        corollary,
        discrete_below_corollary,
        step_violations,
    })
}

/// One CSV row per certificate.
pub fn write_certificates_csv<W: Write>(certs: &[Certificate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "gamma1",
        "gamma2",
        "t",
        "n",
        "tau",
        "empirical_gap",
        "discrete_total",
        "general_total",
        "corollary_total",
        "certified",
        "inputs_hash",
    ])?;
    for c in certs {
        w.write_record([
            c.gamma1.to_string(),
            c.gamma2.to_string(),
            c.t.to_string(),
            c.n.to_string(),
            c.tau.to_string(),
            c.empirical_gap.to_string(),
            c.discrete.total.to_string(),
            c.general.total.to_string(),
            c.corollary.as_ref().map(|p| p.corollary.total.to_string()).unwrap_or_default(),
            c.certified.to_string(),
            c.inputs_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
