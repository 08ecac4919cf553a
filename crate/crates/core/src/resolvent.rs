//! One implicit step: solve `u - tau Delta_h phi(u) - tau (u)_+ G(p(u)) = f`
//! on the grid, i.e. apply the resolvent `(I + tau A)^{-1}` to `f`.
//!
//! The solver is a globalised Newton method in the density variable `u`.
//! Its Jacobian `diag(h'(u)) + tau L diag(phi'(u))` is a nonsingular M-matrix
//! even where `phi'(u) = 0`, which is why `u` is used instead of `v = phi(u)`.
//! A continuation in the regularisation parameter `eps` warm-starts the
//! degenerate problem, and nonlinear Gauss-Seidel sweeps (a damped Picard
//! iteration) take over whenever a Newton step fails to reduce the residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::linalg::{bicgstab, neg_laplacian, Jacobian};
use crate::model::ConstitutiveModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolventConfig {
    pub tau: f64,
    /// Residual target in L1 is `tol_rel * ||f||_1 + tol_abs`.
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Residual target in L-infinity is `linf_rel * (1 + ||f||_inf)`.
    pub linf_rel: f64,
    pub max_iters: usize,
    /// Decreasing regularisation schedule; the model's own `eps` is appended last.
    pub continuation_epsilons: Vec<f64>,
    pub krylov_tol: f64,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            tau: 0.1,
            tol_rel: 1e-10,
            tol_abs: 1e-14,
            linf_rel: 1e-6,
            max_iters: 200,
            continuation_epsilons: vec![1e-2, 1e-4, 0.0],
            krylov_tol: 1e-12,
        }
    }
}

impl ResolventConfig {
    pub fn with_tau(tau: f64) -> Self {
        ResolventConfig {
            tau,
            ..Default::default()
        }
    }

    pub fn validate(&self, model: &ConstitutiveModel) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::input(format!("tau must be > 0, got {}", self.tau)));
        }
        let tg = self.tau * model.g0();
        if tg >= 1.0 {
            return Err(Error::TauTooLarge(tg));
        }
        if !(self.tol_rel >= 0.0 && self.tol_abs >= 0.0) || self.tol_rel + self.tol_abs == 0.0 {
            return Err(Error::input("resolvent tolerances must be >= 0 and not both zero"));
        }
        if !(self.linf_rel > 0.0) {
            return Err(Error::input("linf_rel must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::input("max_iters must be >= 1"));
        }
        if self
            .continuation_epsilons
            .iter()
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(Error::input("continuation epsilons must be finite and >= 0"));
        }
        if self.continuation_epsilons.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::input("continuation epsilons must be decreasing"));
        }
        Ok(())
    }

    pub fn tolerance(&self, f: &GridField) -> f64 {
        self.tol_rel * f.l1_norm() + self.tol_abs
    }

    /// Effective schedule for a model whose target regularisation is `target`.
    pub fn schedule(&self, target: f64) -> Vec<f64> {
        let mut eps: Vec<f64> = self
            .continuation_epsilons
            .iter()
            .copied()
            .filter(|e| *e > target)
            .collect();
        eps.push(target);
        eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs + tol,
        }
    }
}

/// A-posteriori checks of the resolvent bounds. Index order is `r = 1, 2, inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantFlags {
    /// `||u_+||_r <= ||f_+||_r / (1 - tau G(0))`.
    pub positive_part: [BoundCheck; 3],
    /// `||u_-||_r <= ||f_-||_r`.
    pub negative_part: [BoundCheck; 3],
    /// Cells outside `[-||f_-||_inf, ||f_+||_inf / (1 - tau G(0))]`.
    pub pointwise_violations: usize,
}

impl InvariantFlags {
    pub fn all_hold(&self) -> bool {
        self.violation_count() == 0
    }

    pub fn violation_count(&self) -> usize {
        self.positive_part.iter().filter(|c| !c.holds).count()
            + self.negative_part.iter().filter(|c| !c.holds).count()
            + self.pointwise_violations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual_l1: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub u: GridField,
    pub iterations: usize,
    pub picard_sweeps: usize,
    pub final_residual_l1: f64,
    pub final_residual_linf: f64,
    pub stages: Vec<StageRecord>,
    pub invariant_flags: InvariantFlags,
    /// `||phi(u)||_1 / ||f||_1`, logged only.
    pub phi_l1_ratio: f64,
}

/// Applies `(I + tau A)^{-1}` to `f`.
pub fn solve_resolvent(f: &GridField, model: &ConstitutiveModel, cfg: &ResolventConfig) -> Result<ResolventReport> {
    cfg.validate(model)?;
    let tol = cfg.tolerance(f);
    let tol_inf = cfg.linf_rel * (1.0 + f.linf_norm());
    let loose = tol.max(1e-6 * f.l1_norm() + cfg.tol_abs);
    let schedule = cfg.schedule(model.reg.epsilon);

    let mut u = f.values().to_vec();
    let mut stages = Vec::with_capacity(schedule.len());
    let mut iterations = 0;
    let mut sweeps = 0;
    let mut last = None;
    for (i, &eps) in schedule.iter().enumerate() {
        let final_stage = i + 1 == schedule.len();
        let staged = model.with_epsilon(eps)?;
        let mut solver = Newton::new(f, &staged, cfg);
        let target = if final_stage { tol } else { loose };
        let out = solver.run(&mut u, target, if final_stage { tol_inf } else { f64::INFINITY });
        iterations += out.iterations;
        sweeps += out.sweeps;
        stages.push(StageRecord {
            epsilon: eps,
            iterations: out.iterations,
            residual_l1: out.residual_l1,
            converged: out.converged,
        });
        if final_stage {
            if !out.converged {
                return Err(Error::NonConvergence {
                    epsilon: eps,
                    iterations: out.iterations,
                    residual: out.residual_l1,
                });
            }
            last = Some(out);
        } else if !out.converged || u.iter().any(|v| !v.is_finite()) {
            // Warm start only; restart the next stage from the datum if it blew up.
            if u.iter().any(|v| !v.is_finite()) {
                u.copy_from_slice(f.values());
            }
        }
    }
    let out = last.expect("schedule is never empty");
    let u = GridField::new(*f.spec(), u)?;
    let invariant_flags = verify_resolvent_bounds(f, &u, model, cfg.tau);
    let phi_l1 = u.values().iter().map(|v| model.phi(*v).abs()).sum::<f64>() * f.spec().cell_volume();
    let f_l1 = f.l1_norm();
    Ok(ResolventReport {
        u,
        iterations,
        picard_sweeps: sweeps,
        final_residual_l1: out.residual_l1,
        final_residual_linf: out.residual_linf,
        stages,
        invariant_flags,
        phi_l1_ratio: if f_l1 > 0.0 { phi_l1 / f_l1 } else { 0.0 },
    })
}

/// Discrete residual `u - tau Delta_h phi(u) - tau (u)_+ G(p(u)) - f`, cell-wise.
pub fn resolvent_residual(u: &GridField, f: &GridField, model: &ConstitutiveModel, tau: f64) -> Result<Vec<f64>> {
    u.ensure_same_grid(f)?;
    let mut r = vec![0.0; u.values().len()];
    let mut scratch = vec![0.0; u.values().len()];
    residual_into(u.spec(), u.values(), f.values(), model, tau, &mut r, &mut scratch);
    Ok(r)
}

fn residual_into(
    spec: &crate::field::GridSpec,
    u: &[f64],
    f: &[f64],
    model: &ConstitutiveModel,
    tau: f64,
    r: &mut [f64],
    scratch: &mut [f64],
) {
    for (s, u) in scratch.iter_mut().zip(u) {
        *s = model.phi(*u);
    }
    neg_laplacian(spec, scratch, r);
    for ((r, u), f) in r.iter_mut().zip(u).zip(f) {
        *r = model.reaction(*u, tau) + tau * *r - f;
    }
}

/// Checks the positive/negative part bounds in `L^1`, `L^2`, `L^inf` and the
/// cell-wise bounds; never fails, only reports.
pub fn verify_resolvent_bounds(f: &GridField, u: &GridField, model: &ConstitutiveModel, tau: f64) -> InvariantFlags {
    let factor = 1.0 / (1.0 - tau * model.g0());
    let check = |r: Option<f64>| -> (BoundCheck, BoundCheck) {
        let (fp, fm, up, um, fnorm) = match r {
            Some(r) => {
                let (fp, fm) = f.pos_neg_lr(r);
                let (up, um) = u.pos_neg_lr(r);
                (fp, fm, up, um, f.lr_norm(r))
            }
            None => {
                let (fp, fm) = f.pos_neg_linf();
                let (up, um) = u.pos_neg_linf();
                (fp, fm, up, um, f.linf_norm())
            }
        };
        let tol = 1e-8 * (1.0 + fnorm);
        (BoundCheck::new(up, factor * fp, tol), BoundCheck::new(um, fm, tol))
    };
    let (p1, n1) = check(Some(1.0));
    let (p2, n2) = check(Some(2.0));
    let (pi, ni) = check(None);
    let (fp, fm) = f.pos_neg_linf();
    let tol = 1e-8 * (1.0 + f.linf_norm());
    let (lo, hi) = (-fm - tol, factor * fp + tol);
    let pointwise_violations = u.values().iter().filter(|v| **v < lo || **v > hi).count();
    InvariantFlags {
        positive_part: [p1, p2, pi],
        negative_part: [n1, n2, ni],
        pointwise_violations,
    }
}

/// `(||u1 - u2||_1, ||f1 - f2||_1 / (1 - tau G(0)))` for the two resolvents.
pub fn contraction_check(
    f1: &GridField,
    f2: &GridField,
    model: &ConstitutiveModel,
    cfg: &ResolventConfig,
) -> Result<(f64, f64)> {
    f1.ensure_same_grid(f2)?;
    let u1 = solve_resolvent(f1, model, cfg)?.u;
    let u2 = solve_resolvent(f2, model, cfg)?.u;
    let factor = 1.0 / (1.0 - cfg.tau * model.g0());
    Ok((u1.l1_distance(&u2)?, factor * f1.l1_distance(f2)?))
}

/// `(||u||_TV, ||f||_TV / (1 - tau G(0)))`.
pub fn tv_check(f: &GridField, model: &ConstitutiveModel, cfg: &ResolventConfig) -> Result<(f64, f64)> {
    let u = solve_resolvent(f, model, cfg)?.u;
    let factor = 1.0 / (1.0 - cfg.tau * model.g0());
    Ok((u.tv_norm(), factor * f.tv_norm()))
}

struct NewtonOutcome {
    iterations: usize,
    sweeps: usize,
    residual_l1: f64,
    residual_linf: f64,
    converged: bool,
}

struct Newton<'a> {
    f: &'a GridField,
    model: &'a ConstitutiveModel,
    cfg: &'a ResolventConfig,
    r: Vec<f64>,
    trial: Vec<f64>,
    r_trial: Vec<f64>,
    scratch: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

const MAX_BACKTRACKS: usize = 12;
const PICARD_SWEEPS: usize = 4;

impl<'a> Newton<'a> {
    fn new(f: &'a GridField, model: &'a ConstitutiveModel, cfg: &'a ResolventConfig) -> Self {
        let n = f.values().len();
        Newton {
            f,
            model,
            cfg,
            r: vec![0.0; n],
            trial: vec![0.0; n],
            r_trial: vec![0.0; n],
            scratch: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }

    fn residual(&mut self, u: &[f64], into_trial: bool) -> (f64, f64, f64) {
        let spec = self.f.spec();
        let out = if into_trial { &mut self.r_trial } else { &mut self.r };
        residual_into(spec, u, self.f.values(), self.model, self.cfg.tau, out, &mut self.scratch);
        let vol = spec.cell_volume();
        let (mut l1, mut l2, mut linf) = (0.0, 0.0, 0.0f64);
        for r in out.iter() {
            l1 += r.abs();
            l2 += r * r;
            linf = linf.max(r.abs());
        }
        if !(l1.is_finite() && l2.is_finite()) {
            return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        }
        (l1 * vol, l2, linf)
    }

    fn run(&mut self, u: &mut [f64], tol: f64, tol_inf: f64) -> NewtonOutcome {
        let tau = self.cfg.tau;
        let spec = *self.f.spec();
        let (mut l1, mut l2, mut linf) = self.residual(u, false);
        let mut sweeps = 0;
        let mut it = 0;
        while it < self.cfg.max_iters {
            if l1 <= tol && linf <= tol_inf {
                return NewtonOutcome {
                    iterations: it,
                    sweeps,
                    residual_l1: l1,
                    residual_linf: linf,
                    converged: true,
                };
            }
            it += 1;
            for (k, &x) in u.iter().enumerate() {
                self.a[k] = self.model.reaction_prime(x, tau);
                self.b[k] = self.model.phi_prime(x);
            }
            let jac = Jacobian {
                spec: &spec,
                a: &self.a,
                b: &self.b,
                tau,
            };
            let rhs: Vec<f64> = self.r.iter().map(|r| -r).collect();
            let step = if spec.dim == 1 {
                jac.solve_1d(&rhs)
            } else {
                bicgstab(&jac, &rhs, self.cfg.krylov_tol, 20 * rhs.len().max(50)).0
            };

            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                for k in 0..u.len() {
                    self.trial[k] = u[k] + alpha * step[k];
                }
                let trial = std::mem::take(&mut self.trial);
                let (t1, t2, tinf) = self.residual(&trial, true);
                self.trial = trial;
                if t2 < (1.0 - 1e-4 * alpha) * l2 || (t1 <= tol && tinf <= tol_inf) {
                    u.copy_from_slice(&self.trial);
                    std::mem::swap(&mut self.r, &mut self.r_trial);
                    (l1, l2, linf) = (t1, t2, tinf);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                for _ in 0..PICARD_SWEEPS {
                    gauss_seidel_sweep(&spec, u, self.f.values(), self.model, tau);
                }
                sweeps += PICARD_SWEEPS;
                (l1, l2, linf) = self.residual(u, false);
            }
        }
        let converged = l1 <= tol && linf <= tol_inf;
        NewtonOutcome {
            iterations: it,
            sweeps,
            residual_l1: l1,
            residual_linf: linf,
            converged,
        }
    }
}

/// One nonlinear Gauss-Seidel sweep: each cell solves its own monotone scalar
/// equation with the neighbours frozen.
fn gauss_seidel_sweep(spec: &crate::field::GridSpec, u: &mut [f64], f: &[f64], model: &ConstitutiveModel, tau: f64) {
    let n = spec.points_per_axis;
    let periodic = spec.boundary == crate::field::Boundary::Periodic;
    let inv_h2 = 1.0 / (spec.spacing() * spec.spacing());
    let diag = 2.0 * spec.dim as f64;
    for k in 0..u.len() {
        let idx = spec.unravel(k);
        let mut neighbours = 0.0;
        for axis in 0..spec.dim {
            for forward in [true, false] {
                let i = idx[axis];
                let j = match (forward, i) {
                    (true, i) if i + 1 < n => Some(i + 1),
                    (false, i) if i > 0 => Some(i - 1),
                    (true, _) if periodic => Some(0),
                    (false, _) if periodic => Some(n - 1),
                    _ => None,
                };
                if let Some(j) = j {
                    let mut nb = idx;
                    nb[axis] = j;
                    neighbours += model.phi(u[spec.ravel(nb)]);
                }
            }
        }
        let c = tau * inv_h2;
        let rhs = f[k];
        let g = |x: f64| model.reaction(x, tau) + c * (diag * model.phi(x) - neighbours) - rhs;
        let dg = |x: f64| model.reaction_prime(x, tau) + c * diag * model.phi_prime(x);
        u[k] = solve_increasing(g, dg, u[k]);
    }
}

/// Root of a continuous strictly increasing scalar function by safeguarded
/// Newton inside an expanding bracket.
pub(crate) fn solve_increasing(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, x0: f64) -> f64 {
    let g0 = g(x0);
    if g0 == 0.0 {
        return x0;
    }
    let mut width = x0.abs().max(1.0) * 1e-3;
    let (mut lo, mut hi) = if g0 < 0.0 { (x0, x0 + width) } else { (x0 - width, x0) };
    for _ in 0..200 {
        if g0 < 0.0 && g(hi) < 0.0 {
            lo = hi;
            width *= 2.0;
            hi += width;
        } else if g0 > 0.0 && g(lo) > 0.0 {
            hi = lo;
            width *= 2.0;
            lo -= width;
        } else {
            break;
        }
    }
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let newton = x - gx / d;
        x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    x
}
