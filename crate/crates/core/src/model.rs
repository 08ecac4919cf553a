//! Constitutive laws: the power-law flux `phi(u) = sign(u)|u|^gamma`, the
//! pressure `p(u) = gamma/(gamma-1) |u|^(gamma-1)`, and the pressure-dependent
//! growth rate `G(p)`.
//!
//! `phi` can be regularised by
//! `phi_eps(u) = sign(u)((|u|+eps)^gamma - eps^gamma) + eps*u`, which is `C^2`
//! away from the origin, odd, has `phi_eps' >= eps`, and whose derivative
//! converges to `phi'` uniformly on compacts as `eps -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    gamma: f64,
}

impl PowerLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::input(format!("gamma must be > 1, got {gamma}")));
        }
        Ok(PowerLaw { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    Constant,
    Rational,
    Exponential,
}

/// Nonincreasing growth rate with `G(0) = g0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthLaw {
    pub kind: GrowthKind,
    pub g0: f64,
    #[serde(default)]
    pub beta: f64,
    /// Permits `g0 = 0` (pure porous-medium flow, used for validation runs).
    #[serde(default)]
    pub validation_mode: bool,
}

impl GrowthLaw {
    pub fn new(kind: GrowthKind, g0: f64, beta: f64) -> Result<Self> {
        let law = GrowthLaw {
            kind,
            g0,
            beta,
            validation_mode: false,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn constant(g0: f64) -> Result<Self> {
        GrowthLaw::new(GrowthKind::Constant, g0, 0.0)
    }

    pub fn rational(g0: f64, beta: f64) -> Result<Self> {
        GrowthLaw::new(GrowthKind::Rational, g0, beta)
    }

    pub fn exponential(g0: f64, beta: f64) -> Result<Self> {
        GrowthLaw::new(GrowthKind::Exponential, g0, beta)
    }

    /// `G == 0`: no growth. Only for validation against pure porous-medium solutions.
    pub fn none() -> Self {
        GrowthLaw {
            kind: GrowthKind::Constant,
            g0: 0.0,
            beta: 0.0,
            validation_mode: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g0.is_finite() || self.g0 < 0.0 {
            return Err(Error::input(format!("growth g0 must be finite and >= 0, got {}", self.g0)));
        }
        if self.g0 == 0.0 && !self.validation_mode {
            return Err(Error::input(
                "growth g0 = 0 violates G(0) > 0; set validation_mode to run pure porous-medium flow",
            ));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::input(format!("growth beta must be finite and >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// `G(p)` for `p >= 0` (negative arguments are clamped to 0).
    #[inline]
    pub fn value(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        match self.kind {
            GrowthKind::Constant => self.g0,
            GrowthKind::Rational => self.g0 / (1.0 + self.beta * p),
            GrowthKind::Exponential => self.g0 * (-self.beta * p).exp(),
        }
    }

    #[inline]
    pub fn derivative(&self, p: f64) -> f64 {
        let p = p.max(0.0);
        match self.kind {
            GrowthKind::Constant => 0.0,
            GrowthKind::Rational => {
                let q = 1.0 + self.beta * p;
                -self.g0 * self.beta / (q * q)
            }
            GrowthKind::Exponential => -self.beta * self.g0 * (-self.beta * p).exp(),
        }
    }

    /// `sup |G'|` over `[a, b]`, `0 <= a <= b`. `|G'|` is nonincreasing for
    /// every family member, so the maximum sits at the left endpoint.
    pub fn sup_abs_derivative(&self, a: f64, _b: f64) -> f64 {
        self.derivative(a.max(0.0)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Regularization {
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct ConstitutiveModel {
    pub law: PowerLaw,
    pub growth: GrowthLaw,
    pub reg: Regularization,
}

/// Wire form of [`ConstitutiveModel`]: `{gamma, growth: {kind, g0, beta}, epsilon}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub gamma: f64,
    pub growth: GrowthLaw,
    #[serde(default)]
    pub epsilon: f64,
}

impl TryFrom<ModelSpec> for ConstitutiveModel {
    type Error = Error;

    fn try_from(s: ModelSpec) -> Result<Self> {
        ConstitutiveModel::new(s.gamma, s.growth)?.with_epsilon(s.epsilon)
    }
}

impl From<ConstitutiveModel> for ModelSpec {
    fn from(m: ConstitutiveModel) -> Self {
        ModelSpec {
            gamma: m.gamma(),
            growth: m.growth,
            epsilon: m.reg.epsilon,
        }
    }
}

impl ConstitutiveModel {
    pub fn new(gamma: f64, growth: GrowthLaw) -> Result<Self> {
        growth.validate()?;
        Ok(ConstitutiveModel {
            law: PowerLaw::new(gamma)?,
            growth,
            reg: Regularization::default(),
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::input(format!("epsilon must be >= 0, got {epsilon}")));
        }
        self.reg.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.law = PowerLaw::new(gamma)?;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.law.gamma
    }

    pub fn g0(&self) -> f64 {
        self.growth.g0
    }

    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        let g = self.law.gamma;
        let eps = self.reg.epsilon;
        let a = u.abs();
        if eps == 0.0 {
            a.powf(g).copysign(u)
        } else {
            // (a+eps)^g - eps^g without cancellation for a << eps
            (eps.powf(g) * (g * (a / eps).ln_1p()).exp_m1()).copysign(u) + eps * u
        }
    }

    #[inline]
    pub fn phi_prime(&self, u: f64) -> f64 {
        let g = self.law.gamma;
        let eps = self.reg.epsilon;
        g * (u.abs() + eps).powf(g - 1.0) + eps
    }

    /// Inverse of [`ConstitutiveModel::phi`].
    pub fn phi_inverse(&self, v: f64) -> f64 {
        let g = self.law.gamma;
        if self.reg.epsilon == 0.0 {
            return v.abs().powf(1.0 / g).copysign(v);
        }
        if v == 0.0 {
            return 0.0;
        }
        // phi is odd and convex on [0, inf): Newton from the right converges monotonically.
        let target = v.abs();
        let eps = self.reg.epsilon;
        let mut x = target.powf(1.0 / g).max(target / (1.0 + eps)).max(f64::MIN_POSITIVE);
        // Start to the right of the root.
        while self.phi(x) < target {
            x *= 2.0;
        }
        for _ in 0..200 {
            let r = self.phi(x) - target;
            let step = r / self.phi_prime(x);
            let next = x - step;
            if !(next > 0.0) || next >= x {
                break;
            }
            x = next;
            if step.abs() <= 1e-16 * x {
                break;
            }
        }
        x.copysign(v)
    }

    #[inline]
    pub fn pressure(&self, u: f64) -> f64 {
        let g = self.law.gamma;
        g / (g - 1.0) * u.abs().powf(g - 1.0)
    }

    pub fn growth(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::input(format!("growth needs p >= 0, got {p}")));
        }
        Ok(self.growth.value(p))
    }

    pub fn growth_prime(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::input(format!("growth needs p >= 0, got {p}")));
        }
        Ok(self.growth.derivative(p))
    }

    /// Reaction part of the resolvent nonlinearity: `u - tau (u)_+ G(p(u))`.
    #[inline]
    pub(crate) fn reaction(&self, u: f64, tau: f64) -> f64 {
        if u > 0.0 {
            u - tau * u * self.growth.value(self.pressure(u))
        } else {
            u
        }
    }

    /// Derivative of [`ConstitutiveModel::reaction`]; the subgradient 0 of
    /// `(u)_+` is used at `u = 0`. Always `>= 1 - tau G(0)`.
    #[inline]
    pub(crate) fn reaction_prime(&self, u: f64, tau: f64) -> f64 {
        if u > 0.0 {
            let p = self.pressure(u);
            // u * p'(u) = (gamma - 1) p(u)
            let up = (self.law.gamma - 1.0) * p;
            1.0 - tau * (self.growth.value(p) + self.growth.derivative(p) * up)
        } else {
            1.0
        }
    }
}

/// Result of a dense-sampling supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledSup {
    pub value: f64,
    pub samples: usize,
}

const SUP_INITIAL_SAMPLES: usize = 1025;
const SUP_MAX_SAMPLES: usize = 1 << 22;
const SUP_REL_TOL: f64 = 1e-6;

/// `sup |f|` over `[a, b]` by uniform sampling, doubling the resolution until
/// two successive estimates agree to `1e-6` relative.
pub fn sampled_sup(a: f64, b: f64, f: impl Fn(f64) -> f64) -> Result<SampledSup> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::input(format!("empty or invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(SampledSup {
            value: f(a).abs(),
            samples: 1,
        });
    }
    let scan = |n: usize| -> f64 {
        let step = (b - a) / (n - 1) as f64;
        (0..n).fold(0.0, |m, i| {
            let x = if i + 1 == n { b } else { a + step * i as f64 };
            m.max(f(x).abs())
        })
    };
    let mut n = SUP_INITIAL_SAMPLES;
    let mut prev = scan(n);
    let mut total = n;
    loop {
        let next_n = 2 * (n - 1) + 1;
        let next = scan(next_n);
        total += next_n;
        let converged = (next - prev).abs() <= SUP_REL_TOL * next.abs().max(f64::MIN_POSITIVE)
            || (next == 0.0 && prev == 0.0);
        n = next_n;
        prev = next;
        if converged || n >= SUP_MAX_SAMPLES {
            return Ok(SampledSup {
                value: prev,
                samples: total,
            });
        }
    }
}

/// Sampled suprema of the four constitutive mismatches on one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupMetrics {
    pub sqrt_phi_prime: SampledSup,
    pub pressure: SampledSup,
    pub growth: SampledSup,
    pub growth_prime: SampledSup,
}

/// `sup |sqrt(phi1') - sqrt(phi2')|`, `sup |p1 - p2|`, `sup |G1 - G2|` and
/// `sup |G2'|`, each over `[a, b]`.
pub fn sup_metrics(m1: &ConstitutiveModel, m2: &ConstitutiveModel, a: f64, b: f64) -> Result<SupMetrics> {
    Ok(SupMetrics {
        sqrt_phi_prime: sampled_sup(a, b, |s| m1.phi_prime(s).sqrt() - m2.phi_prime(s).sqrt())?,
        pressure: sampled_sup(a, b, |s| m1.pressure(s) - m2.pressure(s))?,
        growth: sampled_sup(a, b, |p| m1.growth.value(p) - m2.growth.value(p))?,
        growth_prime: sampled_sup(a, b, |p| m2.growth.derivative(p))?,
    })
}

/// `sup_{p >= 0} |G1(p) - G2(p)|`, sampled through the map `p = s / (1 - s)`.
pub fn growth_gap_on_half_line(g1: &GrowthLaw, g2: &GrowthLaw) -> Result<SampledSup> {
    let at_infinity = |g: &GrowthLaw| match g.kind {
        GrowthKind::Constant => g.g0,
        _ if g.beta == 0.0 => g.g0,
        _ => 0.0,
    };
    let tail = (at_infinity(g1) - at_infinity(g2)).abs();
    let mut s = sampled_sup(0.0, 1.0, |s| {
        if s >= 1.0 {
            tail
        } else {
            let p = s / (1.0 - s);
            g1.value(p) - g2.value(p)
        }
    })?;
    s.value = s.value.max(tail);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(gamma: f64) -> ConstitutiveModel {
        ConstitutiveModel::new(gamma, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(model(2.0).phi(2.0), 4.0);
        for g in [1.1, 1.5, 2.0, 3.7] {
            assert_eq!(model(g).phi(0.0), 0.0);
            assert_eq!(model(g).with_epsilon(0.1).unwrap().phi(0.0), 0.0);
        }
        assert!((model(1.5).phi(-4.0) + 8.0).abs() < 1e-14);
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(model(2.0).pressure(1.0), 2.0);
        assert_eq!(model(2.0).pressure(0.0), 0.0);
        assert!((model(3.0).pressure(2.0) - 6.0).abs() < 1e-14);
        assert_eq!(model(3.0).pressure(-2.0), model(3.0).pressure(2.0));
    }

    #[test]
    fn growth_examples() {
        let r = ConstitutiveModel::new(2.0, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.growth(1.0).unwrap(), 0.5);
        for law in [
            GrowthLaw::constant(1.3).unwrap(),
            GrowthLaw::rational(1.3, 2.0).unwrap(),
            GrowthLaw::exponential(1.3, 0.7).unwrap(),
        ] {
            let m = ConstitutiveModel::new(2.0, law).unwrap();
            assert_eq!(m.growth(0.0).unwrap(), 1.3);
        }
        let e = ConstitutiveModel::new(2.0, GrowthLaw::exponential(2.0, 0.0).unwrap()).unwrap();
        for p in [0.0, 0.5, 10.0, 1e6] {
            assert_eq!(e.growth(p).unwrap(), 2.0);
        }
        assert!(r.growth(-1.0).is_err());
        assert!(r.growth_prime(-1e-3).is_err());
    }

    #[test]
    fn growth_validation() {
        assert!(GrowthLaw::constant(0.0).is_err());
        assert!(GrowthLaw::rational(1.0, -1.0).is_err());
        assert!(GrowthLaw::none().validate().is_ok());
        assert!(PowerLaw::new(1.0).is_err());
        assert!(model(2.0).with_epsilon(-1.0).is_err());
    }

    #[test]
    fn growth_derivative_bound() {
        for law in [GrowthLaw::rational(1.7, 0.4).unwrap(), GrowthLaw::exponential(1.7, 0.4).unwrap()] {
            for i in 0..1000 {
                let p = i as f64 * 0.05;
                assert!(law.derivative(p) <= 0.0);
                assert!(law.derivative(p).abs() <= law.g0 * law.beta + 1e-15);
            }
        }
    }

    #[test]
    fn growth_prime_matches_central_differences() {
        for law in [
            GrowthLaw::rational(1.7, 0.4).unwrap(),
            GrowthLaw::exponential(0.8, 0.05).unwrap(),
            GrowthLaw::rational(2.0, 3.0).unwrap(),
        ] {
            let mut p = 0.01;
            while p <= 100.0 {
                let d = 1e-5 * p;
                let fd = (law.value(p + d) - law.value(p - d)) / (2.0 * d);
                let exact = law.derivative(p);
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs() + 1e-13,
                    "{law:?} p={p}: {fd} vs {exact}"
                );
                p *= 1.3;
            }
        }
    }

    #[test]
    fn phi_inverse_is_exact() {
        for g in [1.2, 2.0, 3.5] {
            for eps in [0.0, 1e-4, 1e-2] {
                let m = model(g).with_epsilon(eps).unwrap();
                let mut u = 1e-6;
                while u <= 1e6 {
                    for s in [u, -u] {
                        let back = m.phi_inverse(m.phi(s));
                        assert!((back - s).abs() <= 1e-12 * s.abs(), "g={g} eps={eps} u={s} back={back}");
                    }
                    u *= 1.7;
                }
            }
        }
    }

    #[test]
    fn monotonicity_on_samples() {
        for g in [1.3, 2.0, 4.0] {
            for eps in [0.0, 1e-3] {
                let m = model(g).with_epsilon(eps).unwrap();
                let xs: Vec<f64> = (0..2001).map(|i| -5.0 + i as f64 * 0.005).collect();
                for w in xs.windows(2) {
                    assert!(m.phi(w[1]) > m.phi(w[0]));
                    if w[0] >= 0.0 {
                        assert!(m.pressure(w[1]) >= m.pressure(w[0]));
                        assert!(m.growth.value(m.pressure(w[1])) <= m.growth.value(m.pressure(w[0])));
                    }
                }
                assert!(m.phi_prime(0.0) >= eps);
            }
        }
    }

    #[test]
    fn regularization_converges_monotonically() {
        let k = 3.0;
        for g in [1.5, 2.0, 3.0] {
            let raw = model(g);
            let mut prev = f64::INFINITY;
            for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
                let m = raw.with_epsilon(eps).unwrap();
                let err = (0..10_000)
                    .map(|i| -k + 2.0 * k * i as f64 / 9_999.0)
                    .map(|u| (m.phi_prime(u) - raw.phi_prime(u)).abs())
                    .fold(0.0, f64::max);
                assert!(err < prev, "gamma={g} eps={eps}: {err} !< {prev}");
                prev = err;
            }
            assert!(prev < 1e-4);
        }
    }

    #[test]
    fn reaction_derivative_is_bounded_below() {
        let tau = 0.4;
        for law in [GrowthLaw::rational(2.0, 1.0).unwrap(), GrowthLaw::exponential(2.0, 3.0).unwrap()] {
            let m = ConstitutiveModel::new(1.5, law).unwrap();
            for i in 0..500 {
                let u = -2.0 + i as f64 * 0.01;
                assert!(m.reaction_prime(u, tau) >= 1.0 - tau * 2.0 - 1e-14);
            }
        }
    }

    #[test]
    fn sup_metrics_identical_laws() {
        let m = model(2.3);
        let s = sup_metrics(&m, &m, 0.0, 2.0).unwrap();
        assert_eq!(s.sqrt_phi_prime.value, 0.0);
        assert_eq!(s.pressure.value, 0.0);
        assert_eq!(s.growth.value, 0.0);
    }

    #[test]
    fn sup_metrics_growth_prime_at_left_endpoint() {
        let m = model(2.0);
        let s = sup_metrics(&m, &m, 0.0, 1.0).unwrap();
        // |G'| = beta g0 / (1 + beta p)^2, maximal at p = 0.
        let oracle = (0..100_001)
            .map(|i| i as f64 / 100_000.0)
            .map(|p| 1.0 / (1.0 + p) / (1.0 + p))
            .fold(0.0, f64::max);
        assert_eq!(oracle, 1.0);
        assert!((s.growth_prime.value - 1.0).abs() < 1e-15);
        assert_eq!(m.growth.sup_abs_derivative(0.0, 1.0), 1.0);
        assert!(s.growth_prime.samples > 0);
    }

    #[test]
    fn sup_metrics_pressure_matches_brute_force() {
        let (m1, m2) = (model(2.0), model(3.0));
        let s = sup_metrics(&m1, &m2, 0.0, 1.0).unwrap();
        let brute = (0..1_000_000)
            .map(|i| i as f64 / 999_999.0)
            .map(|x| (m2.pressure(x) - m1.pressure(x)).abs())
            .fold(0.0, f64::max);
        assert!((s.pressure.value - brute).abs() <= 1e-6 * brute);
    }

    #[test]
    fn sampled_sup_rejects_empty_interval() {
        assert!(sampled_sup(1.0, 0.0, |x| x).is_err());
        assert_eq!(sampled_sup(0.5, 0.5, |x| x).unwrap().value, 0.5);
    }

    #[test]
    fn growth_gap_on_half_line_examples() {
        let a = GrowthLaw::rational(1.0, 1.0).unwrap();
        let b = GrowthLaw::rational(1.5, 1.0).unwrap();
        assert!((growth_gap_on_half_line(&a, &b).unwrap().value - 0.5).abs() < 1e-12);
        assert_eq!(growth_gap_on_half_line(&a, &a).unwrap().value, 0.0);
        let c = GrowthLaw::constant(1.0).unwrap();
        assert!((growth_gap_on_half_line(&a, &c).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_json_shape() {
        let m = ConstitutiveModel::new(2.5, GrowthLaw::rational(1.0, 0.5).unwrap())
            .unwrap()
            .with_epsilon(1e-3)
            .unwrap();
        let json = serde_json::to_value(m).unwrap();
        assert_eq!(json["gamma"], 2.5);
        assert_eq!(json["growth"]["kind"], "rational");
        assert_eq!(json["epsilon"], 1e-3);
        let back: ConstitutiveModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
        let bad = serde_json::json!({"gamma": 0.5, "growth": {"kind": "constant", "g0": 1.0}});
        assert!(serde_json::from_value::<ConstitutiveModel>(bad).is_err());
    }
}
