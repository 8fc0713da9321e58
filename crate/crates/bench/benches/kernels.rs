use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cns_core::analysis::manufactured::Manufactured;
use cns_core::fluxes::{diffusive_upwind, face_velocity};
use cns_core::schemes::{fv_residual, initial_state, mac_residual, SchemeConfig, Stepper};
use cns_core::{GasLaw, Mesh, SchemeKind, ViscosityLaw};

fn setup(kind: SchemeKind, n: usize) -> (Manufactured, SchemeConfig, Mesh) {
    let law = GasLaw::new(1.0, 2.0).unwrap();
    let visc = ViscosityLaw::new(0.1, 0.0).unwrap();
    let m = Manufactured::standard(law, visc);
    let mesh = Mesh::new(2, n).unwrap();
    let cfg = SchemeConfig::new(kind, law, visc, 0.0, mesh.h()).unwrap().with_sources(m.sources());
    (m, cfg, mesh)
}

fn residuals(c: &mut Criterion) {
    let mut g = c.benchmark_group("residual");
    for n in [32, 64] {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let (m, cfg, mesh) = setup(kind, n);
            let s0 = initial_state(&m.initial_data(), &mesh, kind, 0.0).unwrap();
            let mut s1 = s0.clone();
            s1.time = cfg.dt;
            g.bench_with_input(BenchmarkId::new(kind.name(), n), &n, |b, _| match kind {
                SchemeKind::Fv => b.iter(|| fv_residual(&s0, &s1, &cfg).unwrap()),
                SchemeKind::Mac => b.iter(|| mac_residual(&s0, &s1, &cfg).unwrap()),
            });
        }
    }
    g.finish();
}

fn upwind_flux(c: &mut Criterion) {
    let (m, _, mesh) = setup(SchemeKind::Mac, 64);
    let s = initial_state(&m.initial_data(), &mesh, SchemeKind::Mac, 0.0).unwrap();
    let uf = face_velocity(&s.velocity);
    c.bench_function("diffusive_upwind/64", |b| b.iter(|| diffusive_upwind(&s.rho, &uf, mesh.h(), 0.0).unwrap()));
}

/// One backward-Euler step: Newton with Jacobian assembly and linear solves.
fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    g.sample_size(10);
    for n in [16, 32] {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let (m, cfg, mesh) = setup(kind, n);
            let s0 = initial_state(&m.initial_data(), &mesh, kind, 0.0).unwrap();
            let dt = cfg.dt;
            g.bench_with_input(BenchmarkId::new(kind.name(), n), &n, |b, _| {
                b.iter(|| Stepper::new(mesh, cfg.clone()).unwrap().step(&s0, dt).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, residuals, upwind_flux, step);
criterion_main!(benches);
