//! Implicit Euler marching `u_k = (I + tau A)^{-1} u_{k-1}` with uniform
//! `tau = t / n`, plus refinement diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{GridField, Window};
use crate::model::ConstitutiveModel;
use crate::resolvent::{solve_resolvent, InvariantFlags, ResolventConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub t_final: f64,
    pub n_steps: usize,
    /// Solver settings; its `tau` is overwritten by `t_final / n_steps`.
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl EvolutionConfig {
    pub fn new(t_final: f64, n_steps: usize) -> Self {
        EvolutionConfig {
            t_final,
            n_steps,
            resolvent: ResolventConfig::default(),
            snapshot_times: vec![t_final],
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn resolvent_config(&self) -> ResolventConfig {
        ResolventConfig {
            tau: self.tau(),
            ..self.resolvent.clone()
        }
    }

    pub fn validate(&self, model: &ConstitutiveModel) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::input(format!("t_final must be > 0, got {}", self.t_final)));
        }
        if self.n_steps == 0 {
            return Err(Error::input("n_steps must be >= 1"));
        }
        if let Some(s) = self
            .snapshot_times
            .iter()
            .find(|s| !(s.is_finite() && **s >= 0.0 && **s <= self.t_final * (1.0 + 1e-12)))
        {
            return Err(Error::input(format!(
                "snapshot time {s} outside [0, {}]",
                self.t_final
            )));
        }
        self.resolvent_config().validate(model)
    }

    /// Iterate index shown at time `s` by the piecewise-constant interpolant.
    pub fn step_index(&self, s: f64) -> usize {
        let k = (s / self.tau() * (1.0 + 1e-12)).floor() as usize;
        k.min(self.n_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub iterations: usize,
    pub residual_l1: f64,
    pub invariant_flags: InvariantFlags,
    /// `||(u_k)_+||_inf <= (1 - tau G(0))^{-k} ||(u_0)_+||_inf`.
    pub growth_cap_ok: bool,
    /// Only meaningful for nonnegative `u_0`: every cell `>= -1e-8`.
    pub comparison_ok: bool,
    pub boundary_mass_fraction: f64,
}

impl StepRecord {
    pub fn all_ok(&self) -> bool {
        self.invariant_flags.all_hold() && self.growth_cap_ok && self.comparison_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tau: f64,
    pub snapshots: Vec<(f64, GridField)>,
    pub mass_series: Vec<(f64, f64)>,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridField {
        &self.snapshots.last().expect("trajectory has snapshots").1
    }

    pub fn snapshot_at(&self, s: f64) -> Option<&GridField> {
        self.snapshots
            .iter()
            .find(|(t, _)| (t - s).abs() <= 1e-12 * (1.0 + s.abs()))
            .map(|(_, f)| f)
    }

    pub fn violation_count(&self) -> usize {
        self.steps.iter().filter(|s| !s.all_ok()).count()
    }
}

/// Marches `cfg.n_steps` resolvent steps from `u0`. Snapshots are taken at
/// time 0 and at every requested time; the final time is always included.
pub fn evolve(u0: &GridField, model: &ConstitutiveModel, cfg: &EvolutionConfig) -> Result<Trajectory> {
    evolve_with(u0, model, cfg, |_, _| Ok(()))
}

/// Like [`evolve`], calling `on_step(k, u_k)` after each step (and for `k = 0`).
pub fn evolve_with(
    u0: &GridField,
    model: &ConstitutiveModel,
    cfg: &EvolutionConfig,
    mut on_step: impl FnMut(usize, &GridField) -> Result<()>,
) -> Result<Trajectory> {
    cfg.validate(model)?;
    let rcfg = cfg.resolvent_config();
    let tau = rcfg.tau;
    let mut times: Vec<f64> = cfg.snapshot_times.clone();
    times.push(0.0);
    times.push(cfg.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let wanted: Vec<(f64, usize)> = times.iter().map(|s| (*s, cfg.step_index(*s))).collect();

    let growth = 1.0 / (1.0 - tau * model.g0());
    let pos0 = u0.pos_neg_linf().0;
    let nonneg = u0.values().iter().all(|v| *v >= 0.0);

    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut mass_series = Vec::with_capacity(cfg.n_steps + 1);
    let mut steps = Vec::with_capacity(cfg.n_steps);
    let mut u = u0.clone();
    let record = |k: usize, u: &GridField, snapshots: &mut Vec<(f64, GridField)>| {
        for (s, idx) in &wanted {
            if *idx == k {
                snapshots.push((*s, u.clone()));
            }
        }
    };
    record(0, &u, &mut snapshots);
    mass_series.push((0.0, u.integral()));
    on_step(0, &u)?;
    for k in 1..=cfg.n_steps {
        let rep = solve_resolvent(&u, model, &rcfg).map_err(|e| Error::StepFailed {
            step: k,
            source: Box::new(e),
        })?;
        u = rep.u;
        let cap = growth.powi(k as i32) * pos0;
        let pos = u.pos_neg_linf().0;
        steps.push(StepRecord {
            step: k,
            iterations: rep.iterations,
            residual_l1: rep.final_residual_l1,
            invariant_flags: rep.invariant_flags,
            growth_cap_ok: pos <= cap * (1.0 + 1e-8) + 1e-12,
            comparison_ok: !nonneg || u.values().iter().all(|v| *v >= -1e-8),
            boundary_mass_fraction: u.boundary_mass_fraction(),
        });
        record(k, &u, &mut snapshots);
        mass_series.push((k as f64 * tau, u.integral()));
        on_step(k, &u)?;
    }
    Ok(Trajectory {
        tau,
        snapshots,
        mass_series,
        steps,
    })
}

/// State at `t` after `n` uniform steps.
pub fn evolve_to(u0: &GridField, model: &ConstitutiveModel, t: f64, n: usize, base: &ResolventConfig) -> Result<GridField> {
    let cfg = EvolutionConfig {
        resolvent: base.clone(),
        snapshot_times: Vec::new(),
        ..EvolutionConfig::new(t, n)
    };
    Ok(evolve(u0, model, &cfg)?.final_state().clone())
}

/// Successive-refinement gaps `(n, ||u^{(2n)}(t) - u^{(n)}(t)||_1)`.
pub fn self_convergence_rate(
    u0: &GridField,
    model: &ConstitutiveModel,
    t: f64,
    n_list: &[usize],
    base: &ResolventConfig,
    exec: Exec,
) -> Result<Vec<(usize, f64)>> {
    let mut ns: Vec<usize> = n_list.iter().flat_map(|n| [*n, 2 * n]).collect();
    ns.sort_unstable();
    ns.dedup();
    let states = exec.try_map(&ns, |n| evolve_to(u0, model, t, *n, base))?;
    let state = |n: usize| &states[ns.binary_search(&n).expect("computed")];
    n_list
        .iter()
        .map(|n| Ok((*n, state(2 * n).l1_distance(state(*n))?)))
        .collect()
}

/// Least-squares decay exponent `p` of `y ~ C x^{-p}`. Points with `y <= 0`
/// are skipped.
pub fn fit_decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

pub fn mass(f: &GridField) -> f64 {
    f.integral()
}

/// Cell-measure quadrature over an aligned window.
pub fn window_mass(f: &GridField, window: &Window) -> Result<f64> {
    let cells = window.cells(f.spec())?;
    let v = f.values();
    Ok(cells.iter().map(|k| v[*k]).sum::<f64>() * f.spec().cell_volume())
}

/// Barenblatt source solution of `u_t = Delta(u^m)` in `d` dimensions,
/// evaluated at squared radius `r2`.
pub fn barenblatt(r2: f64, t: f64, c: f64, m: f64, d: usize) -> f64 {
    let d = d as f64;
    let alpha = d / (d * (m - 1.0) + 2.0);
    let beta = alpha / d;
    let k = alpha * (m - 1.0) / (2.0 * m * d);
    let core = c - k * r2 * t.powf(-2.0 * beta);
    t.powf(-alpha) * core.max(0.0).powf(1.0 / (m - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Boundary, GridSpec};
    use crate::model::GrowthLaw;

    fn spec1(n: usize, b: Boundary) -> GridSpec {
        GridSpec::new(1, 1.0, n, b).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let u0 = GridField::zeros(spec1(16, Boundary::DirichletZero));
        let m = ConstitutiveModel::new(2.0, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap();
        let mut cfg = EvolutionConfig::new(1.0, 8);
        cfg.snapshot_times = vec![0.25, 0.5];
        let tr = evolve(&u0, &m, &cfg).unwrap();
        assert_eq!(tr.snapshots.len(), 4);
        for (_, s) in &tr.snapshots {
            assert!(s.values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn constant_datum_follows_scalar_recursion() {
        let (c, g0, t, n) = (0.4, 1.0, 0.5, 10);
        let m = ConstitutiveModel::new(2.0, GrowthLaw::constant(g0).unwrap()).unwrap();
        let u0 = GridField::constant(spec1(12, Boundary::Periodic), c);
        let mut cfg = EvolutionConfig::new(t, n);
        cfg.snapshot_times = (0..=n).map(|k| k as f64 * t / n as f64).collect();
        let tr = evolve(&u0, &m, &cfg).unwrap();
        let tau = t / n as f64;
        assert_eq!(tr.snapshots.len(), n + 1);
        for (k, (_, s)) in tr.snapshots.iter().enumerate() {
            let expect = c / (1.0 - tau * g0).powi(k as i32);
            assert!(s.values().iter().all(|v| (v - expect).abs() < 1e-12));
        }
        assert_eq!(tr.violation_count(), 0);
    }

    #[test]
    fn snapshot_uses_floor_index() {
        let cfg = EvolutionConfig::new(1.0, 4);
        assert_eq!(cfg.step_index(0.0), 0);
        assert_eq!(cfg.step_index(0.49), 1);
        assert_eq!(cfg.step_index(0.5), 2);
        assert_eq!(cfg.step_index(0.75), 3);
        assert_eq!(cfg.step_index(1.0), 4);
    }

    #[test]
    fn step_failure_names_the_step() {
        let m = ConstitutiveModel::new(2.0, GrowthLaw::rational(1.0, 1.0).unwrap()).unwrap();
        let u0 = GridField::from_fn(spec1(32, Boundary::DirichletZero), |x| (1.0 - 4.0 * x[0] * x[0]).max(0.0)).unwrap();
        let mut cfg = EvolutionConfig::new(0.5, 4);
        cfg.resolvent.max_iters = 1;
        cfg.resolvent.tol_rel = 1e-16;
        cfg.resolvent.tol_abs = 1e-300;
        let err = evolve(&u0, &m, &cfg).unwrap_err();
        assert!(matches!(err, Error::StepFailed { step: 1, .. }), "{err}");
    }

    #[test]
    fn constant_gap_matches_scalar_oracle() {
        let (c, g0, t) = (0.3, 1.0, 0.5);
        let spec = spec1(10, Boundary::Periodic);
        let m = ConstitutiveModel::new(2.0, GrowthLaw::constant(g0).unwrap()).unwrap();
        let u0 = GridField::constant(spec, c);
        let gaps = self_convergence_rate(&u0, &m, t, &[4, 8, 16], &ResolventConfig::default(), Exec::Parallel).unwrap();
        for (n, gap) in gaps {
            let n = n as f64;
            let oracle = c * spec.measure() * ((1.0 - t * g0 / (2.0 * n)).powf(-2.0 * n) - (1.0 - t * g0 / n).powf(-n)).abs();
            assert!((gap - oracle).abs() < 1e-10, "{gap} vs {oracle}");
        }
    }

    #[test]
    fn window_mass_examples() {
        let spec = spec1(8, Boundary::DirichletZero);
        let one = GridField::constant(spec, 1.0);
        assert!((window_mass(&one, &Window::interval(-1.0, 1.0)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(window_mass(&one, &Window::interval(0.25, 0.25)).unwrap(), 0.0);
        assert!(matches!(
            window_mass(&one, &Window::interval(0.1, 0.5)),
            Err(Error::UnalignedWindow { .. })
        ));
        assert_eq!(mass(&one), 2.0);
    }

    #[test]
    fn barenblatt_mass_is_constant_in_time() {
        // The profile solves the PDE exactly, so its integral cannot change.
        let mass_at = |t: f64| {
            let n = 200_000;
            let h = 4.0 / n as f64;
            (0..n)
                .map(|i| barenblatt((-2.0 + (i as f64 + 0.5) * h).powi(2), t, 0.1, 2.0, 1))
                .sum::<f64>()
                * h
        };
        let (m1, m2) = (mass_at(0.1), mass_at(0.2));
        assert!((m1 - m2).abs() < 1e-8 * m1);
    }

    #[test]
    fn barenblatt_satisfies_the_pde_pointwise() {
        let (t, c) = (0.15, 0.1);
        let u = |x: f64, t: f64| barenblatt(x * x, t, c, 2.0, 1);
        for x in [0.0, 0.1, 0.3, 0.5] {
            let (dt, dx) = (1e-5, 1e-4);
            let ut = (u(x, t + dt) - u(x, t - dt)) / (2.0 * dt);
            let lap = (u(x + dx, t).powi(2) - 2.0 * u(x, t).powi(2) + u(x - dx, t).powi(2)) / (dx * dx);
            assert!((ut - lap).abs() < 1e-5 * (1.0 + ut.abs()), "x={x}: {ut} vs {lap}");
        }
    }

    #[test]
    fn decay_exponent_fit() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0].iter().map(|n: &f64| (*n, 3.0 * n.powf(-0.7))).collect();
        assert!((fit_decay_exponent(&pts).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(fit_decay_exponent(&[(1.0, 0.0)]), None);
    }
}
