//! The four subcommands. Each returns an exit code (0 or 1) and a JSON
//! summary, or an error that the caller maps to exit code 2 or 3.

use std::path::Path;

use pme_core::evolution::{barenblatt, evolve, fit_decay_exponent, self_convergence_rate, EvolutionConfig};
use pme_core::field::{GridField, GridSpec, Window};
use pme_core::inference::{
    bin_edges, ess_geyer, gamma_grid, histogram_with_edges, mala_chain, mh_chain, posterior_tv_convergence, quadrature_posterior,
    synthetic_observations, tv_distance, ChainResult, ForwardModel, ObservationSet, PosteriorPotential, QuadraturePosterior,
    Scenario,
};
use pme_core::model::{ConstitutiveModel, GrowthLaw};
use pme_core::resolvent::ResolventConfig;
use pme_core::stability::{certify, write_certificates_csv, CertifyOptions};
use pme_core::{Error, Exec, Result};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::OutputDir;

pub struct Outcome {
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

fn csv_bytes(f: &GridField) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    Ok(buf)
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| Error::Input(format!("missing field `{name}`")))
}

pub fn cmd_evolve(cfg: &RunConfig, base: &Path, out: &mut OutputDir) -> Result<Outcome> {
    let sec = section(&cfg.evolve, "evolve")?;
    let model = cfg.model()?;
    let u0 = cfg.initial.build(cfg.grid, model.gamma(), base)?;
    let ecfg = EvolutionConfig {
        t_final: sec.t_final,
        n_steps: sec.n_steps,
        resolvent: cfg.resolvent.clone(),
        snapshot_times: sec.snapshot_times.clone(),
    };
    let tr = evolve(&u0, &model, &ecfg)?;
    let mut snapshots = Vec::new();
    for (i, (t, f)) in tr.snapshots.iter().enumerate() {
        let name = format!("snapshot_{i:03}.csv");
        out.write(&name, &csv_bytes(f)?)?;
        snapshots.push(json!({ "file": name, "time": t, "step": ecfg.step_index(*t) }));
    }
    let mut mass = String::from("time,mass\n");
    for (t, m) in &tr.mass_series {
        mass.push_str(&format!("{t},{m}\n"));
    }
    out.write("mass.csv", mass.as_bytes())?;
    let violations = tr.violation_count();
    let steps: Vec<_> = tr
        .steps
        .iter()
        .map(|s| {
            json!({
                "step": s.step,
                "iterations": s.iterations,
                "residual_l1": s.residual_l1,
                "invariant_violations": s.invariant_flags.violation_count(),
                "growth_cap_ok": s.growth_cap_ok,
                "comparison_ok": s.comparison_ok,
                "boundary_mass_fraction": s.boundary_mass_fraction,
            })
        })
        .collect();
    out.write_json("steps.json", &steps)?;
    Ok(Outcome {
        exit_code: i32::from(violations > 0),
        summary: json!({
            "tau": tr.tau,
            "snapshots": snapshots,
            "steps_with_violations": violations,
            "final_mass": tr.mass_series.last().map(|m| m.1),
        }),
    })
}

pub fn cmd_certify(cfg: &RunConfig, base: &Path, out: &mut OutputDir, exec: Exec) -> Result<Outcome> {
    let sec = section(&cfg.certify, "certify")?;
    let model = cfg.model()?;
    let mut jobs = Vec::new();
    for [g1, g2] in &sec.pairs {
        for n in &sec.n_list {
            jobs.push((*g1, *g2, *n));
        }
    }
    let u01 = cfg.initial.build(cfg.grid, sec.pairs[0][0], base)?;
    let u02 = match &sec.initial2 {
        Some(i) => i.build(cfg.grid, sec.pairs[0][1], base)?,
        None => u01.clone(),
    };
    let second_resolvent = cfg.test_hooks.second_solver_tol.map(|tol| ResolventConfig {
        tol_rel: tol,
        linf_rel: tol,
        ..cfg.resolvent.clone()
    });
    let certs = exec.try_map(&jobs, |(g1, g2, n)| {
        let m1 = model.with_gamma(*g1)?;
        let mut m2 = model.with_gamma(*g2)?;
        if let Some(g) = sec.growth2 {
            m2.growth = g;
        }
        let opts = CertifyOptions {
            t: sec.t,
            n: *n,
            resolvent: cfg.resolvent.clone(),
            second_resolvent: second_resolvent.clone(),
            per_step: sec.per_step,
        };
        certify(&u01, &u02, &m1, &m2, &opts, Exec::Sequential)
    })?;
    out.write_json("certificates.json", &certs)?;
    let mut buf = Vec::new();
    write_certificates_csv(&certs, &mut buf)?;
    out.write("certificates.csv", &buf)?;
    let failed = certs.iter().filter(|c| !c.certified).count();
    let verdicts: Vec<_> = certs
        .iter()
        .map(|c| json!({ "gamma1": c.gamma1, "gamma2": c.gamma2, "n": c.n, "certified": c.certified, "gap": c.empirical_gap, "bound": c.discrete.total }))
        .collect();
    Ok(Outcome {
        exit_code: i32::from(failed > 0),
        summary: json!({ "certificates": certs.len(), "failed": failed, "verdicts": verdicts }),
    })
}

fn chain_summary(chain: &ChainResult, quad: &QuadraturePosterior, edges: &[f64]) -> Result<serde_json::Value> {
    let samples = chain.samples();
    let hist = histogram_with_edges(&samples, edges.to_vec())?;
    let max_agreement = chain
        .records
        .iter()
        .filter(|r| r.accepted)
        .filter_map(|r| r.grad_agreement)
        .fold(0.0f64, f64::max);
    Ok(json!({
        "n_samples": samples.len(),
        "acceptance_rate": chain.acceptance_rate,
        "burn_in_acceptance": chain.burn_in_acceptance,
        "final_step": chain.final_step,
        "ess": ess_geyer(&samples),
        "map_estimate": chain.map_estimate(),
        "mean": samples.iter().sum::<f64>() / samples.len().max(1) as f64,
        "tv_to_quadrature": tv_distance(&hist.masses, &quad.bin_masses(edges)?)?,
        "fallbacks": chain.fallbacks,
        "max_gradient_agreement_accepted": max_agreement,
        "histogram": hist,
        "aborted": chain.aborted,
    }))
}

pub fn cmd_infer(cfg: &RunConfig, base: &Path, out: &mut OutputDir, exec: Exec) -> Result<Outcome> {
    let sec = section(&cfg.infer, "infer")?;
    let seed = cfg.seed.ok_or_else(|| Error::Input("missing field `seed`".into()))?;
    let model = cfg.model()?;
    let u0 = cfg.initial.build(cfg.grid, model.gamma(), base)?;
    let scenario = Scenario {
        u0,
        template: model,
        t_final: sec.t_final,
        n_steps: sec.n_steps,
        resolvent: cfg.resolvent.clone(),
    };
    let windows = sec.windows.iter().map(|w| Window::from_flat(w)).collect::<Result<Vec<_>>>()?;
    let obs = match (&sec.observations, &sec.synthetic) {
        (Some(path), _) => ObservationSet::load_json(base.join(path))?,
        (None, Some(syn)) => synthetic_observations(&scenario, windows.clone(), sec.times.clone(), &syn.spec(seed))?,
        (None, None) => return Err(Error::Input("missing field `observations`".into())),
    };
    out.write("observations.json", obs.to_json()?.as_bytes())?;

    let fm = ForwardModel::new(scenario.clone(), obs.windows().to_vec(), obs.times().to_vec())?;
    let data_weight = if sec.prior_only { 0.0 } else { 1.0 };
    let mut pot = PosteriorPotential::new(fm, obs.clone(), sec.prior)?;
    pot.data_weight = data_weight;
    let grid = gamma_grid(sec.grid.lo, sec.grid.hi, sec.grid.points);
    let quad = quadrature_posterior(&pot, &grid, exec)?;
    let mut table = String::from("gamma,V,mass\n");
    for ((g, v), m) in quad.grid.iter().zip(&quad.potentials).zip(&quad.masses) {
        table.push_str(&format!("{g},{v},{m}\n"));
    }
    out.write("posterior_quadrature.csv", table.as_bytes())?;

    let centres = gamma_grid(sec.grid.lo, sec.grid.hi, sec.bins.unwrap_or(sec.grid.points));
    let edges = bin_edges(&centres);
    let bin_width = centres[1] - centres[0];
    let init = quad.map_estimate;
    let run_mh = || sec.mh.as_ref().map(|s| mh_chain(&pot, &s.chain_config(seed.wrapping_add(1), init, 0.44)));
    let run_mala = || sec.mala.as_ref().map(|s| mala_chain(&pot, &s.chain_config(seed.wrapping_add(2), init, 0.574)));
    let (mh, mala) = exec.join(run_mh, run_mala);
    let mut summary = json!({
        "seed": seed,
        "quadrature": {
            "map_estimate": quad.map_estimate,
            "mean": quad.mean,
            "bin_width": bin_width,
            "bin_edges": edges,
            "bin_masses": quad.bin_masses(&edges)?,
            "grid": quad.grid,
            "masses": quad.masses,
        },
    });
    let mut aborted = None;
    for (name, chain) in [("mh", mh), ("mala", mala)] {
        if let Some(chain) = chain {
            let chain = chain?;
            let mut buf = Vec::new();
            chain.write_csv(&mut buf)?;
            out.write(&format!("chain_{name}.csv"), &buf)?;
            summary[name] = chain_summary(&chain, &quad, &edges)?;
            if let Some(msg) = &chain.aborted {
                aborted = Some(format!("{name} chain aborted: {msg}"));
            }
        }
    }
    if let Some(n_list) = &sec.tv_convergence {
        let tv = posterior_tv_convergence(&scenario, &obs, &sec.prior, &grid, n_list, data_weight, exec)?;
        let mut table = String::from("n,tv\n");
        for (n, d) in &tv {
            table.push_str(&format!("{n},{d}\n"));
        }
        out.write("tv_convergence.csv", table.as_bytes())?;
        let pts: Vec<(f64, f64)> = tv.iter().map(|(n, d)| (*n as f64, *d)).collect();
        summary["tv_convergence"] = json!({ "table": tv, "fitted_exponent": fit_decay_exponent(&pts) });
    }
    out.write_json("posterior.json", &summary)?;
    if let Some(msg) = aborted {
        return Err(Error::Forward {
            gamma: f64::NAN,
            source: Box::new(Error::Input(msg)),
        });
    }
    Ok(Outcome { exit_code: 0, summary })
}

/// L1 error of the numerical Barenblatt evolution at `t1` on one refinement level.
pub fn barenblatt_error(spec: GridSpec, gamma: f64, t0: f64, t1: f64, c: f64, n_steps: usize, resolvent: &ResolventConfig) -> Result<f64> {
    let model = ConstitutiveModel::new(gamma, GrowthLaw::none())?;
    let profile = |t: f64| GridField::from_fn(spec, |x| barenblatt(x[0] * x[0] + x[1] * x[1], t, c, gamma, spec.dim));
    let ecfg = EvolutionConfig {
        resolvent: resolvent.clone(),
        snapshot_times: Vec::new(),
        ..EvolutionConfig::new(t1 - t0, n_steps)
    };
    let tr = evolve(&profile(t0)?, &model, &ecfg)?;
    tr.final_state().l1_distance(&profile(t1)?)
}

pub fn cmd_validate(cfg: &RunConfig, base: &Path, out: &mut OutputDir, exec: Exec) -> Result<Outcome> {
    let sec = section(&cfg.validate, "validate")?;
    let mut pass = true;
    let mut summary = json!({});
    if let Some(sc) = &sec.self_convergence {
        let model = cfg.model()?;
        let u0 = cfg.initial.build(cfg.grid, model.gamma(), base)?;
        let gaps = self_convergence_rate(&u0, &model, sc.t, &sc.n_list, &cfg.resolvent, exec)?;
        let mut table = String::from("n,gap\n");
        for (n, g) in &gaps {
            table.push_str(&format!("{n},{g}\n"));
        }
        out.write("self_convergence.csv", table.as_bytes())?;
        let pts: Vec<(f64, f64)> = gaps.iter().map(|(n, g)| (*n as f64, *g)).collect();
        let rate = fit_decay_exponent(&pts);
        let ok = rate.is_none_or(|r| r >= sc.min_rate);
        pass &= ok;
        summary["self_convergence"] = json!({ "gaps": gaps, "fitted_exponent": rate, "pass": ok });
    }
    if let Some(b) = &sec.barenblatt {
        let gamma = cfg.model.gamma;
        let errors = exec.try_map(&b.levels, |[n_points, n_steps]| {
            let spec = GridSpec::new(cfg.grid.dim, cfg.grid.half_width, *n_points, cfg.grid.boundary)?;
            barenblatt_error(spec, gamma, b.t0, b.t1, b.c, *n_steps, &cfg.resolvent)
        })?;
        let mut table = String::from("points_per_axis,n_steps,l1_error\n");
        for ([p, n], e) in b.levels.iter().zip(&errors) {
            table.push_str(&format!("{p},{n},{e}\n"));
        }
        out.write("barenblatt.csv", table.as_bytes())?;
        let ok = errors.windows(2).all(|w| w[1] < w[0]);
        pass &= ok;
        summary["barenblatt"] = json!({ "levels": b.levels, "l1_errors": errors, "monotone": ok });
    }
    Ok(Outcome {
        exit_code: i32::from(!pass),
        summary,
    })
}
