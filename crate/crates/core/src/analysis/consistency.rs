//! Consistency residuals: the defect left when a numerical trajectory is tested
//! against smooth functions in the weak form of the continuity and momentum equations.
//!
//! The trajectory is piecewise constant in time (state `n` on `[t_n, t_{n+1})`) and
//! in space, so every space-time integral reduces to exact slab means of
//! trigonometric polynomials.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoxLattice, Mesh};
use crate::physics::{velocity_derivatives, GasLaw, ViscosityLaw};
use crate::schemes::{run, InitialData, SchemeConfig, SolverOptions, Trajectory};
use crate::smooth::{Factor, SmoothFunction, TrigPoly};
use crate::state::{FluidState, SchemeKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub test_function: String,
    pub tau: f64,
    pub e_rho: f64,
    pub e_m: f64,
    pub h: f64,
    pub dt: f64,
}

/// `(state, t0, t1)` for every slab of `[0, tau]`, plus the state alive at `tau`.
fn slabs(traj: &Trajectory, tau: f64) -> Result<(Vec<(&FluidState, f64, f64)>, &FluidState)> {
    let end = traj.end_time();
    let slack = 1e-12 * traj.dt.max(1.0);
    if !(tau >= 0.0) || tau > end + slack {
        return Err(Error::OutsideHorizon { tau, end });
    }
    if !traj.is_complete() {
        return Err(Error::InvalidParameter { name: "trajectory", reason: "every time level must be stored".into() });
    }
    let out = traj
        .states
        .windows(2)
        .filter(|w| w[0].time < tau - slack)
        .map(|w| (&w[0], w[0].time, w[1].time.min(tau)))
        .collect();
    let current = traj.states.iter().rev().find(|s| s.time <= tau + slack).expect("initial state at t = 0");
    Ok((out, current))
}

fn weighted(values: &[f64], means: &[f64]) -> f64 {
    values.iter().zip(means).map(|(v, m)| v * m).sum()
}

/// `[int rho_h phi]_0^tau - int_0^tau int (rho_h d_t phi + rho_h Pi_Q u_h . grad phi)`.
pub fn consistency_residual_density(traj: &Trajectory, phi: &TrigPoly, tau: f64) -> Result<f64> {
    let (slabs, last) = slabs(traj, tau)?;
    let mesh = *last.mesh();
    check_dim(&mesh, phi)?;
    let d = mesh.dim();
    let lat = mesh.cell_lattice();
    let vol = mesh.cell_volume();
    let phi_t = phi.d_dt();
    let grad: Vec<TrigPoly> = (0..d).map(|j| phi.d_dx(j)).collect();
    let first = &traj.states[0];
    let lhs = vol * weighted(last.rho.values(), &phi.lattice_means(last.time, &lat))
        - vol * weighted(first.rho.values(), &phi.lattice_means(first.time, &lat));
    let mut rhs = 0.0;
    for (s, t0, t1) in slabs {
        let u = s.velocity.cell_velocity();
        let rho = s.rho.values();
        let mut acc = weighted(rho, &phi_t.lattice_slab_means(t0, t1, &lat));
        for (j, g) in grad.iter().enumerate() {
            let m = g.lattice_slab_means(t0, t1, &lat);
            acc += rho.iter().zip(u.component(j).values()).zip(&m).map(|((r, v), m)| r * v * m).sum::<f64>();
        }
        rhs += (t1 - t0) * vol * acc;
    }
    Ok(lhs - rhs)
}

fn check_dim(mesh: &Mesh, p: &TrigPoly) -> Result<()> {
    if p.dim() != mesh.dim() {
        return Err(Error::MeshMismatch);
    }
    Ok(())
}

/// Lattice of entry `(i, j)` of the scheme's discrete velocity gradient.
fn gradient_lattice(mesh: &Mesh, kind: SchemeKind, i: usize, j: usize) -> BoxLattice {
    match kind {
        SchemeKind::Fv => mesh.dual_lattice(j),
        SchemeKind::Mac => mesh.bidual_lattice(i, j),
    }
}

/// `[int rho_h Pi_Q u_h . Phi]_0^tau` minus the time integral of
/// `rho_h u . d_t Phi + rho_h u (x) u : grad Phi + p_h div Phi - mu grad_h u_h : grad Phi
/// - nu div_h u_h div Phi`, with `u = Pi_Q u_h`.
pub fn consistency_residual_momentum(
    traj: &Trajectory,
    phi: &[TrigPoly],
    tau: f64,
    law: &GasLaw,
    visc: &ViscosityLaw,
) -> Result<f64> {
    let (slabs, last) = slabs(traj, tau)?;
    let mesh = *last.mesh();
    let d = mesh.dim();
    if phi.len() != d {
        return Err(Error::LengthMismatch { expected: d, got: phi.len() });
    }
    for p in phi {
        check_dim(&mesh, p)?;
    }
    let kind = last.kind();
    let lat = mesh.cell_lattice();
    let vol = mesh.cell_volume();
    let (mu, nu) = (visc.mu(), visc.nu(d));
    let phi_t: Vec<TrigPoly> = phi.iter().map(|p| p.d_dt()).collect();
    // grad_phi[i][j] = d_j Phi_i
    let grad_phi: Vec<Vec<TrigPoly>> = phi.iter().map(|p| (0..d).map(|j| p.d_dx(j)).collect()).collect();
    let div_phi = (0..d).fold(TrigPoly::zero(d), |acc, j| acc.add(&grad_phi[j][j]));
    let momentum_pairing = |s: &FluidState, t: f64| {
        let m = s.momentum();
        (0..d).map(|i| weighted(m.component(i).values(), &phi[i].lattice_means(t, &lat))).sum::<f64>()
    };
    let first = &traj.states[0];
    let lhs = vol * momentum_pairing(last, last.time) - vol * momentum_pairing(first, first.time);
    let mut rhs = 0.0;
    for (s, t0, t1) in slabs {
        let u = s.velocity.cell_velocity();
        let rho = s.rho.values();
        let p: Vec<f64> = rho.iter().map(|&r| law.p(r)).collect();
        let (g, div) = velocity_derivatives(&s.velocity);
        let div_means = div_phi.lattice_slab_means(t0, t1, &lat);
        let mut acc = weighted(&p, &div_means) - nu * weighted(div.values(), &div_means);
        for i in 0..d {
            let ui = u.component(i).values();
            let m_t = phi_t[i].lattice_slab_means(t0, t1, &lat);
            acc += rho.iter().zip(ui).zip(&m_t).map(|((r, v), m)| r * v * m).sum::<f64>();
            for j in 0..d {
                let uj = u.component(j).values();
                let m_x = grad_phi[i][j].lattice_slab_means(t0, t1, &lat);
                acc += (0..rho.len()).map(|k| rho[k] * ui[k] * uj[k] * m_x[k]).sum::<f64>();
                let m_g = grad_phi[i][j].lattice_slab_means(t0, t1, &gradient_lattice(&mesh, kind, i, j));
                acc -= mu * weighted(g.entry(i, j), &m_g);
            }
        }
        rhs += (t1 - t0) * vol * acc;
    }
    Ok(lhs - rhs)
}

pub fn consistency_report(
    traj: &Trajectory,
    test_function: &str,
    phi: &TrigPoly,
    phi_m: &[TrigPoly],
    tau: f64,
    law: &GasLaw,
    visc: &ViscosityLaw,
) -> Result<ConsistencyReport> {
    Ok(ConsistencyReport {
        test_function: test_function.to_string(),
        tau,
        e_rho: consistency_residual_density(traj, phi, tau)?,
        e_m: consistency_residual_momentum(traj, phi_m, tau, law, visc)?,
        h: traj.final_state().mesh().h(),
        dt: traj.dt,
    })
}

fn term(c: f64, time: Factor, x: Factor, y: Factor) -> TrigPoly {
    TrigPoly::term(2, c, time, &[x, y])
}

/// Smooth two-dimensional initial data without parity symmetries, so that no test
/// function pairing vanishes identically.
pub fn study_initial_data() -> InitialData {
    let (o, s, c) = (Factor::ONE, Factor::sin(1), Factor::cos(1));
    let rho = TrigPoly::constant(2, 2.0).add(&term(0.4, o, s, c)).add(&term(0.2, o, o, c)).add(&term(0.2, o, s, o));
    let u1 = term(0.5, o, o, s).add(&term(0.3, o, c, s)).add(&term(0.2, o, c, o));
    let u2 = term(-0.4, o, s, o).add(&term(0.3, o, o, c)).add(&term(0.2, o, s, s));
    InitialData::new(Arc::new(rho), vec![Arc::new(u1), Arc::new(u2)])
}

/// Test functions `(phi, Phi)` used by [`consistency_study`].
pub fn study_test_functions() -> (TrigPoly, [TrigPoly; 2]) {
    let (o, s, c) = (Factor::ONE, Factor::sin(1), Factor::cos(1));
    let phi = term(1.0, o, c, o).add(&term(0.5, c, o, s));
    let phi_m = [term(1.0, o, o, s).add(&term(0.5, o, c, o)), term(1.0, c, c, o).add(&term(0.5, o, s, s))];
    (phi, phi_m)
}

/// Runs the scheme from [`study_initial_data`] with `dt = h^2` up to `tau` on each
/// mesh of the ladder and evaluates both residuals at `tau`.
pub fn consistency_study(
    kind: SchemeKind,
    law: GasLaw,
    visc: ViscosityLaw,
    epsilon: f64,
    solver: SolverOptions,
    ladder: &[usize],
    tau: f64,
) -> Result<Vec<ConsistencyReport>> {
    let data = study_initial_data();
    let (phi, phi_m) = study_test_functions();
    ladder
        .iter()
        .map(|&n| {
            let mesh = Mesh::new(2, n)?;
            let cfg = SchemeConfig::new(kind, law, visc, epsilon, mesh.h() * mesh.h())?.with_solver(solver);
            let (traj, _) = run(&data, tau, &cfg, &mesh)?;
            consistency_report(&traj, "study", &phi, &phi_m, tau, &law, &visc)
        })
        .collect()
}
