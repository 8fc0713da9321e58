//! Invariants on random data.

use cns_core::fluxes::{diffusive_upwind, diffusion_scale, face_velocity, upwind};
use cns_core::identities::{ibp_identity_suite, nc1_cell, nc1_staggered};
use cns_core::physics::{dissipation, relative_energy, total_energy};
use cns_core::schemes::{fv_residual, mac_residual, SchemeConfig, Stepper};
use cns_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind() -> impl Strategy<Value = SchemeKind> {
    prop_oneof![Just(SchemeKind::Fv), Just(SchemeKind::Mac)]
}

fn random_state(kind: SchemeKind, mesh: Mesh, seed: u64, speed: f64) -> FluidState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = CellField::random(mesh, &mut rng, 0.5, 1.5);
    let velocity = match kind {
        SchemeKind::Fv => Velocity::Collocated(CellVectorField::random(mesh, &mut rng, -speed, speed)),
        SchemeKind::Mac => Velocity::Staggered(StaggeredField::random(mesh, &mut rng, -speed, speed)),
    };
    FluidState::new(rho, velocity, 0.0).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identities_hold(seed in any::<u64>(), dim in 2usize..=3, n in 2usize..=6) {
        let r = ibp_identity_suite(&Mesh::new(dim, n).unwrap(), seed);
        let bad: Vec<_> = r.rows.iter().filter(|x| !x.passed()).collect();
        prop_assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn nc1_bounds(seed in any::<u64>(), dim in 2usize..=3, n in 2usize..=8) {
        let m = Mesh::new(dim, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = nc1_staggered(&StaggeredField::random(m, &mut rng, -1.0, 1.0));
        prop_assert!(a <= b * (1.0 + 1e-12), "{a} > {b}");
        let (a, b) = nc1_cell(&CellVectorField::random(m, &mut rng, -1.0, 1.0));
        prop_assert!(a <= b * (1.0 + 1e-12), "{a} > {b}");
    }

    /// The donor-cell flux lies between the fluxes of its two neighbours.
    #[test]
    fn upwind_between_neighbours(seed in any::<u64>(), n in 2usize..=8, eps in -0.9f64..2.0) {
        let m = Mesh::new(2, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = CellField::random(m, &mut rng, 0.1, 3.0);
        let u = StaggeredField::random(m, &mut rng, -1.0, 1.0);
        let up = upwind(&r, &u);
        let fup = diffusive_upwind(&r, &u, m.h(), eps).unwrap();
        let c = diffusion_scale(m.h(), eps).unwrap();
        for f in m.all_faces() {
            let (k, l, _) = m.face_neighbors(f);
            let (rk, rl, v) = (r.values()[k], r.values()[l], u.at(f));
            let (lo, hi) = ((rk * v).min(rl * v), (rk * v).max(rl * v));
            prop_assert!(up.at(f) >= lo && up.at(f) <= hi);
            prop_assert!(up.at(f) * v >= 0.0);
            prop_assert!((fup.at(f) - (up.at(f) - c * (rl - rk))).abs() <= 1e-14 * (1.0 + c));
        }
    }

    /// The mass rows are in flux form: their integral is the change of total mass.
    #[test]
    fn mass_residual_is_conservative(k in kind(), seed in any::<u64>(), n in 2usize..=8, eps in -0.5f64..1.0) {
        let m = Mesh::new(2, n).unwrap();
        let law = GasLaw::new(1.0, 1.4).unwrap();
        let visc = ViscosityLaw::new(0.1, 0.05).unwrap();
        let dt = 0.01;
        let cfg = SchemeConfig::new(k, law, visc, eps, dt).unwrap();
        let prev = random_state(k, m, seed, 1.0);
        let mut cand = random_state(k, m, seed ^ 0x5eed, 1.0);
        cand.time = dt;
        let res = match k {
            SchemeKind::Fv => fv_residual(&prev, &cand, &cfg).unwrap().0,
            SchemeKind::Mac => mac_residual(&prev, &cand, &cfg).unwrap().0,
        };
        let change = (cand.mass() - prev.mass()) / dt;
        prop_assert!((res.integral() - change).abs() <= 1e-11 * (1.0 + change.abs()));
    }

    #[test]
    fn constant_states_are_fixed_points(
        k in kind(),
        dim in 2usize..=3,
        n in 2usize..=5,
        rho in 0.1f64..5.0,
        u in prop::array::uniform3(-2.0f64..2.0),
        gamma in 1.05f64..4.0,
        eps in -0.9f64..2.0,
    ) {
        let m = Mesh::new(dim, n).unwrap();
        let law = GasLaw::new(1.0, gamma).unwrap();
        let visc = ViscosityLaw::new(0.1, 0.05).unwrap();
        let cfg = SchemeConfig::new(k, law, visc, eps, 0.01).unwrap();
        let velocity = match k {
            SchemeKind::Fv => Velocity::Collocated(CellVectorField::constant(m, &u[..dim])),
            SchemeKind::Mac => Velocity::Staggered(StaggeredField::constant(m, &u[..dim])),
        };
        let s0 = FluidState::new(CellField::constant(m, rho), velocity, 0.0).unwrap();
        let s1 = FluidState { time: 0.01, ..s0.clone() };
        let (r_mass, r_mom): (Vec<f64>, Vec<f64>) = match k {
            SchemeKind::Fv => {
                let (a, b) = fv_residual(&s0, &s1, &cfg).unwrap();
                (a.into_values(), b.components().iter().flat_map(|c| c.values().to_vec()).collect())
            }
            SchemeKind::Mac => {
                let (a, b) = mac_residual(&s0, &s1, &cfg).unwrap();
                (a.into_values(), b.components().concat())
            }
        };
        prop_assert!(max_abs(&r_mass) <= 1e-14 && max_abs(&r_mom) <= 1e-14);
        prop_assert_eq!(relative_energy(&law, &s0, &s0.rho, &s0.velocity).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// One implicit step keeps the density positive, conserves mass and does not
    /// create energy, up to the Newton tolerance.
    #[test]
    fn step_is_positive_conservative_and_stable(
        k in kind(),
        seed in any::<u64>(),
        n in 3usize..=8,
        gamma in 1.1f64..3.0,
        eps in -0.5f64..1.0,
        dt in 0.002f64..0.05,
    ) {
        let m = Mesh::new(2, n).unwrap();
        let law = GasLaw::new(1.0, gamma).unwrap();
        let visc = ViscosityLaw::new(0.1, 0.0).unwrap();
        let cfg = SchemeConfig::new(k, law, visc, eps, dt).unwrap();
        let tol = 10.0 * cfg.solver.tolerance;
        let s0 = random_state(k, m, seed, 0.5);
        let (s1, _) = Stepper::new(m, cfg).unwrap().step(&s0, dt).unwrap();
        prop_assert!(s1.min_density() > 0.0);
        prop_assert!((s1.mass() - s0.mass()).abs() <= tol);
        let slack = total_energy(&s1, &law) - total_energy(&s0, &law) + dt * dissipation(&s1, &visc);
        prop_assert!(slack <= tol, "slack {slack:e}");
    }
}
