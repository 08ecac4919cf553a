use pme_core::inference::{gamma_grid, posterior_from_potentials, tv_distance};
use pme_core::resolvent::{resolvent_residual, verify_resolvent_bounds};
use pme_core::stability::{bound_discrete, bound_general, upsilon_check};
use pme_core::{solve_resolvent, Boundary, ConstitutiveModel, GridField, GridSpec, GrowthLaw, ResolventConfig};
use proptest::prelude::*;

fn spec(boundary: Boundary) -> GridSpec {
    GridSpec::new(1, 1.0, 32, boundary).unwrap()
}

fn field(boundary: Boundary) -> impl Strategy<Value = GridField> {
    prop::collection::vec(-2.0f64..2.0, 32).prop_map(move |v| GridField::new(spec(boundary), v).unwrap())
}

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::DirichletZero), Just(Boundary::Periodic)]
}

fn growth() -> impl Strategy<Value = GrowthLaw> {
    (0.1f64..2.0, 0.0f64..2.0, 0..3usize).prop_map(|(g0, beta, k)| match k {
        0 => GrowthLaw::constant(g0).unwrap(),
        1 => GrowthLaw::rational(g0, beta).unwrap(),
        _ => GrowthLaw::exponential(g0, beta).unwrap(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resolvent_is_accretive_and_bounded(
        (f1, f2) in boundary().prop_flat_map(|b| (field(b), field(b))),
        gamma in 1.2f64..4.0,
        g in growth(),
        tau_g0 in 0.05f64..0.95,
    ) {
        let m = ConstitutiveModel::new(gamma, g).unwrap();
        let tau = tau_g0 / g.g0;
        let cfg = ResolventConfig::with_tau(tau);
        let u1 = solve_resolvent(&f1, &m, &cfg).unwrap().u;
        let u2 = solve_resolvent(&f2, &m, &cfg).unwrap().u;
        let lhs = u1.l1_distance(&u2).unwrap();
        let rhs = f1.l1_distance(&f2).unwrap() / (1.0 - tau_g0);
        prop_assert!(lhs <= rhs + 1e-8, "{lhs} > {rhs}");
        prop_assert!(verify_resolvent_bounds(&f1, &u1, &m, tau).all_hold());
        let r = resolvent_residual(&u1, &f1, &m, tau).unwrap();
        let r1: f64 = r.iter().map(|x| x.abs()).sum::<f64>() * f1.spec().cell_volume();
        prop_assert!(r1 <= 1e-9 * (1.0 + f1.l1_norm()));
    }

    #[test]
    fn resolvent_preserves_order(
        f in field(Boundary::Periodic),
        bump in prop::collection::vec(0.0f64..1.0, 32),
        gamma in 1.2f64..4.0,
        g in growth(),
    ) {
        let m = ConstitutiveModel::new(gamma, g).unwrap();
        let cfg = ResolventConfig::with_tau(0.5 / g.g0);
        let upper = GridField::new(*f.spec(), f.values().iter().zip(&bump).map(|(a, b)| a + b).collect()).unwrap();
        let u = solve_resolvent(&f, &m, &cfg).unwrap().u;
        let v = solve_resolvent(&upper, &m, &cfg).unwrap().u;
        prop_assert!(u.values().iter().zip(v.values()).all(|(a, b)| *a <= b + 1e-9));
    }

    #[test]
    fn tv_does_not_grow_beyond_factor(f in field(Boundary::Periodic), gamma in 1.2f64..4.0, g in growth()) {
        let m = ConstitutiveModel::new(gamma, g).unwrap();
        let cfg = ResolventConfig::with_tau(0.5 / g.g0);
        let u = solve_resolvent(&f, &m, &cfg).unwrap().u;
        prop_assert!(u.tv_norm() <= 2.0 * f.tv_norm() + 1e-8);
    }

    #[test]
    fn phi_is_odd_and_increasing(gamma in 1.01f64..6.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let m = ConstitutiveModel::new(gamma, GrowthLaw::constant(1.0).unwrap()).unwrap();
        prop_assert_eq!(m.phi(-a), -m.phi(a));
        if a < b {
            prop_assert!(m.phi(a) < m.phi(b));
        }
        prop_assert!((m.phi_inverse(m.phi(a)) - a).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn discrete_bound_dominates_general(
        f1 in field(Boundary::DirichletZero),
        f2 in field(Boundary::DirichletZero),
        g1 in 1.2f64..3.0,
        dg in 0.0f64..1.0,
        g in growth(),
        n in 1usize..64,
    ) {
        let m1 = ConstitutiveModel::new(g1, g).unwrap();
        let m2 = ConstitutiveModel::new(g1 + dg, g).unwrap();
        let t = 0.5 / g.g0;
        let disc = bound_discrete(&f1, &f2, &m1, &m2, n, t / n as f64).unwrap();
        let gen = bound_general(&f1, &f2, &m1, &m2, t).unwrap();
        prop_assert!(gen.total >= 0.0);
        prop_assert!(gen.total <= disc.total * (1.0 + 1e-12));
        prop_assert!(gen.term_initial >= f1.l1_distance(&f2).unwrap() - 1e-12);
    }

    #[test]
    fn upsilon_power_at_most_one(g1 in 1.001f64..8.0, d in 1e-6f64..8.0) {
        prop_assert!(upsilon_check(g1, g1 + d).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn posterior_masses_are_a_distribution(v in prop::collection::vec(-50.0f64..50.0, 2..60)) {
        let grid = gamma_grid(1.5, 2.5, v.len());
        let q = posterior_from_potentials(&grid, v).unwrap();
        prop_assert!((q.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.masses.iter().all(|m| *m >= 0.0));
        let bins = q.bin_masses(&pme_core::inference::bin_edges(&gamma_grid(1.5, 2.5, 7))).unwrap();
        prop_assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(tv_distance(&q.masses, &q.masses).unwrap() == 0.0);
    }
}
