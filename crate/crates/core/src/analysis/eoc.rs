//! Error tracking against a reference solution and empirical orders of convergence.

use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField, StaggeredField};
use crate::mesh::Mesh;
use crate::physics::{error_norms, relative_energy, velocity_derivatives, GasLaw, ViscosityLaw};
use crate::schemes::{run, run_observed, SchemeConfig, SolverOptions, Trajectory};
use crate::state::{FluidState, SchemeKind, Velocity};

use super::manufactured::Manufactured;

/// Least-squares slope of `log e` against `log h`.
///
/// `None` when fewer than two usable points remain or every error is at round-off.
pub fn fit_order(hs: &[f64], errs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|(h, e)| **h > 0.0 && **e > 1e-300 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 || errs.iter().all(|e| e.abs() < 1e-13) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// A solution the numerical one is compared with, delivered on the scheme's spaces.
pub trait Reference {
    fn state_at(&self, mesh: &Mesh, kind: SchemeKind, t: f64) -> Result<FluidState>;
}

impl Reference for Manufactured {
    fn state_at(&self, mesh: &Mesh, kind: SchemeKind, t: f64) -> Result<FluidState> {
        self.reference_state(mesh, kind, t)
    }
}

/// A stored trajectory is piecewise constant in time; on a coarser mesh its states
/// are injected by cell and face averaging.
impl Reference for Trajectory {
    fn state_at(&self, mesh: &Mesh, kind: SchemeKind, t: f64) -> Result<FluidState> {
        let slack = 1e-9 * self.dt;
        if t < -slack || t > self.end_time() + slack {
            return Err(Error::OutsideHorizon { tau: t, end: self.end_time() });
        }
        let s = self.states.iter().rev().find(|s| s.time <= t + slack).expect("initial state precedes t");
        if s.kind() != kind {
            return Err(Error::VelocityKind("reference trajectory"));
        }
        let mut out = if s.mesh() == mesh { s.clone() } else { inject(s, mesh)? };
        out.time = t;
        Ok(out)
    }
}

/// Averages a fine state onto a coarser mesh whose resolution divides the fine one.
pub fn inject(fine: &FluidState, coarse: &Mesh) -> Result<FluidState> {
    let fm = *fine.mesh();
    let d = fm.dim();
    if coarse.dim() != d || coarse.n() == 0 || fm.n() % coarse.n() != 0 {
        return Err(Error::InvalidMesh(format!("cannot inject N={} onto N={}", fm.n(), coarse.n())));
    }
    let r = fm.n() / coarse.n();
    let sub = r.pow(d as u32);
    // Fine cells inside coarse cell `k`, offset per sub-index.
    let fine_cell = |k: usize, q: usize| {
        let lk = coarse.lattice(k);
        let mut idx = [0usize; 3];
        let mut rem = q;
        for a in 0..d {
            idx[a] = lk[a] * r + rem % r;
            rem /= r;
        }
        fm.cell_at(&idx[..d])
    };
    let average = |v: &[f64]| -> Vec<f64> {
        coarse.cells().map(|k| (0..sub).map(|q| v[fine_cell(k, q)]).sum::<f64>() / sub as f64).collect()
    };
    let rho = CellField::new(*coarse, average(fine.rho.values()))?;
    let velocity = match &fine.velocity {
        Velocity::Collocated(_) => {
            let m = fine.momentum();
            Velocity::Collocated(CellVectorField::new(
                (0..d)
                    .map(|i| {
                        let mi = average(m.component(i).values());
                        CellField::new(*coarse, mi.iter().zip(rho.values()).map(|(a, b)| a / b).collect())
                    })
                    .collect::<Result<Vec<_>>>()?,
            )?)
        }
        Velocity::Staggered(u) => {
            let faces = r.pow(d as u32 - 1);
            let comps = (0..d)
                .map(|i| {
                    let c = u.component(i);
                    coarse
                        .cells()
                        .map(|k| {
                            let lk = coarse.lattice(k);
                            let mut acc = 0.0;
                            for q in 0..faces {
                                let mut idx = [0usize; 3];
                                let mut rem = q;
                                for a in 0..d {
                                    if a == i {
                                        idx[a] = r * (lk[a] + 1) - 1;
                                    } else {
                                        idx[a] = lk[a] * r + rem % r;
                                        rem /= r;
                                    }
                                }
                                acc += c[fm.cell_at(&idx[..d])];
                            }
                            acc / faces as f64
                        })
                        .collect()
                })
                .collect();
            Velocity::Staggered(StaggeredField::new(*coarse, comps)?)
        }
    };
    FluidState::new(rho, velocity, fine.time)
}

fn velocity_difference(a: &Velocity, b: &Velocity) -> Result<Velocity> {
    match (a, b) {
        (Velocity::Collocated(x), Velocity::Collocated(y)) => Ok(Velocity::Collocated(CellVectorField::new(
            x.components().iter().zip(y.components()).map(|(p, q)| p.zip_map(q, |s, t| s - t)).collect(),
        )?)),
        (Velocity::Staggered(x), Velocity::Staggered(y)) => Ok(Velocity::Staggered(StaggeredField::new(
            *x.mesh(),
            x.components().iter().zip(y.components()).map(|(p, q)| p.iter().zip(q).map(|(s, t)| s - t).collect()).collect(),
        )?)),
        _ => Err(Error::VelocityKind("velocity difference")),
    }
}

/// Errors at one time level, with integrals accumulated up to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryPoint {
    pub n: usize,
    pub t: f64,
    pub relative_energy: f64,
    /// `sum dt mu |grad_h (u_h - u_ref)|^2` up to this level.
    pub gradient_error: f64,
    /// `sum dt nu |div_h (u_h - u_ref)|^2` up to this level.
    pub divergence_error: f64,
    pub density_error: f64,
    pub momentum_error: f64,
    /// `sum dt |u_h - u_ref|^2` up to this level.
    pub velocity_error_sq: f64,
}

/// Streams states through the error metrics. The first observed state is level 0 and
/// contributes nothing to time integrals; state `n >= 1` is weighted by `t_n - t_{n-1}`.
pub struct ErrorTracker<'a> {
    law: GasLaw,
    visc: ViscosityLaw,
    reference: &'a dyn Reference,
    last: Option<HistoryPoint>,
}

impl<'a> ErrorTracker<'a> {
    pub fn new(law: GasLaw, visc: ViscosityLaw, reference: &'a dyn Reference) -> Self {
        ErrorTracker { law, visc, reference, last: None }
    }

    pub fn observe(&mut self, state: &FluidState) -> Result<HistoryPoint> {
        let mesh = *state.mesh();
        let r = self.reference.state_at(&mesh, state.kind(), state.time)?;
        let re = relative_energy(&self.law, state, &r.rho, &r.velocity)?;
        let norms = error_norms(&self.law, state, &r.rho, &r.momentum(), &r.velocity)?;
        let diff = velocity_difference(&state.velocity, &r.velocity)?;
        let (g, div) = velocity_derivatives(&diff);
        let (n, dt, prev) = match &self.last {
            None => (0, 0.0, None),
            Some(p) => (p.n + 1, state.time - p.t, Some(*p)),
        };
        let acc = |f: fn(&HistoryPoint) -> f64, add: f64| prev.as_ref().map_or(0.0, f) + dt * add;
        let point = HistoryPoint {
            n,
            t: state.time,
            relative_energy: re,
            gradient_error: acc(|p| p.gradient_error, self.visc.mu() * g.norm_sq()),
            divergence_error: acc(|p| p.divergence_error, self.visc.nu(mesh.dim()) * div.inner(&div)),
            density_error: norms.density,
            momentum_error: norms.momentum,
            velocity_error_sq: acc(|p| p.velocity_error_sq, norms.velocity * norms.velocity),
        };
        self.last = Some(point);
        Ok(point)
    }
}

/// Per-level relative energy and accumulated dissipation errors along a trajectory.
pub fn relative_energy_history(
    traj: &Trajectory,
    reference: &dyn Reference,
    law: GasLaw,
    visc: ViscosityLaw,
) -> Result<Vec<HistoryPoint>> {
    let mut tracker = ErrorTracker::new(law, visc, reference);
    traj.states.iter().map(|s| tracker.observe(s)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtRule {
    /// `dt = c h`.
    Linear(f64),
    /// `dt = c h^2`.
    Quadratic(f64),
    Fixed(f64),
}

impl DtRule {
    pub fn dt(self, h: f64) -> f64 {
        match self {
            DtRule::Linear(c) => c * h,
            DtRule::Quadratic(c) => c * h * h,
            DtRule::Fixed(dt) => dt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EocReference {
    /// The manufactured solution, projected on each level.
    Exact,
    /// A run on the finer mesh `N`, injected onto each level.
    FineGrid(usize),
}

/// A manufactured test case and the scheme settings to run it with.
#[derive(Clone, Debug)]
pub struct EocProblem {
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub solver: SolverOptions,
    pub t_end: f64,
    pub solution: Manufactured,
}

impl EocProblem {
    pub fn config(&self, dt: f64) -> Result<SchemeConfig> {
        Ok(SchemeConfig::new(self.scheme, self.solution.law(), self.solution.visc(), self.epsilon, dt)?
            .with_solver(self.solver)
            .with_sources(self.solution.sources()))
    }
}

/// Metric names in [`EocLevel::metrics`] order.
pub const METRICS: [&str; 6] = ["relative_energy", "gradient", "divergence", "density", "momentum", "velocity"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EocLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// `sup_n E(rho_h, u_h | reference)`.
    pub relative_energy: f64,
    pub gradient: f64,
    pub divergence: f64,
    /// `sup_n` density error, `L^gamma` for `gamma <= 2`, else `L^2`.
    pub density: f64,
    /// `sup_n` momentum error in `L^(2 gamma / (gamma + 1))`.
    pub momentum: f64,
    /// `L^2 L^2` velocity error.
    pub velocity: f64,
    pub max_rho: f64,
    pub max_speed: f64,
    pub newton_iterations: usize,
}

impl EocLevel {
    pub fn metrics(&self) -> [f64; 6] {
        [self.relative_energy, self.gradient, self.divergence, self.density, self.momentum, self.velocity]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EocTable {
    pub scheme: SchemeKind,
    pub levels: Vec<EocLevel>,
    /// Least-squares order per metric, `None` when undefined.
    pub orders: Vec<(&'static str, Option<f64>)>,
}

impl EocTable {
    pub fn from_levels(scheme: SchemeKind, levels: Vec<EocLevel>) -> Self {
        let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let orders = METRICS
            .iter()
            .enumerate()
            .map(|(k, &name)| {
                let errs: Vec<f64> = levels.iter().map(|l| l.metrics()[k]).collect();
                (name, fit_order(&hs, &errs))
            })
            .collect();
        EocTable { scheme, levels, orders }
    }

    pub fn order(&self, metric: &str) -> Option<f64> {
        self.orders.iter().find(|(m, _)| *m == metric).and_then(|(_, o)| *o)
    }
}

fn run_level(
    problem: &EocProblem,
    n: usize,
    dt_rule: DtRule,
    reference: &dyn Reference,
) -> Result<EocLevel> {
    let mesh = Mesh::new(problem.solution.dim(), n)?;
    let cfg = problem.config(dt_rule.dt(mesh.h()))?;
    let mut tracker = ErrorTracker::new(problem.solution.law(), problem.solution.visc(), reference);
    let mut sup = [0.0f64; 3];
    let mut last = None;
    let (_, report) = run_observed(&problem.solution.initial_data(), problem.t_end, &cfg, &mesh, 0, &mut |s, _| {
        let p = tracker.observe(s)?;
        sup[0] = sup[0].max(p.relative_energy);
        sup[1] = sup[1].max(p.density_error);
        sup[2] = sup[2].max(p.momentum_error);
        last = Some(p);
        Ok(())
    })?;
    let last = last.expect("initial state observed");
    Ok(EocLevel {
        n,
        h: mesh.h(),
        dt: report.dt,
        steps: report.steps.len() - 1,
        relative_energy: sup[0],
        gradient: last.gradient_error,
        divergence: last.divergence_error,
        density: sup[1],
        momentum: sup[2],
        velocity: last.velocity_error_sq.sqrt(),
        max_rho: report.max_density(),
        max_speed: report.max_speed(),
        newton_iterations: report.total_iterations(),
    })
}

/// Runs the problem on every mesh of the ladder and fits orders. The ladder needs at
/// least three strictly increasing resolutions; a fine-grid reference must be a
/// multiple of each of them.
pub fn eoc_study(problem: &EocProblem, ladder: &[usize], dt_rule: DtRule, reference: EocReference) -> Result<EocTable> {
    if ladder.len() < 3 {
        return Err(Error::LadderTooShort { needed: 3, got: ladder.len() });
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter { name: "ladder", reason: "resolutions must increase strictly".into() });
    }
    let levels = match reference {
        EocReference::Exact => {
            ladder.iter().map(|&n| run_level(problem, n, dt_rule, &problem.solution)).collect::<Result<Vec<_>>>()?
        }
        EocReference::FineGrid(nf) => {
            if ladder.iter().any(|&n| nf <= n || nf % n != 0) {
                return Err(Error::InvalidParameter {
                    name: "reference",
                    reason: format!("fine resolution {nf} must be a proper multiple of every level"),
                });
            }
            let mesh = Mesh::new(problem.solution.dim(), nf)?;
            let cfg = problem.config(dt_rule.dt(mesh.h()))?;
            let (fine, _) = run(&problem.solution.initial_data(), problem.t_end, &cfg, &mesh)?;
            ladder.iter().map(|&n| run_level(problem, n, dt_rule, &fine)).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(EocTable::from_levels(problem.scheme, levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> GasLaw {
        GasLaw::new(1.0, 2.0).unwrap()
    }

    fn visc() -> ViscosityLaw {
        ViscosityLaw::new(0.1, 0.0).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let hs = [0.5, 0.25, 0.125];
        let errs: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((fit_order(&hs, &errs).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(fit_order(&hs, &[0.0, 0.0, 0.0]), None);
        assert_eq!(fit_order(&[0.5], &[1.0]), None);
    }

    #[test]
    fn self_reference_is_zero() {
        let m = Manufactured::standard(law(), visc());
        let mesh = Mesh::new(2, 8).unwrap();
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let cfg = SchemeConfig::new(kind, law(), visc(), 0.0, 0.05).unwrap();
            let (traj, _) = run(&m.initial_data(), 0.1, &cfg, &mesh).unwrap();
            let hist = relative_energy_history(&traj, &traj, law(), visc()).unwrap();
            assert_eq!(hist.len(), 3);
            for p in hist {
                assert_eq!(p.relative_energy, 0.0);
                assert_eq!(p.gradient_error + p.divergence_error + p.velocity_error_sq, 0.0);
                assert_eq!(p.density_error + p.momentum_error, 0.0);
            }
        }
    }

    #[test]
    fn perturbed_reference_matches_physics() {
        let m = Manufactured::standard(law(), visc());
        let mesh = Mesh::new(2, 8).unwrap();
        let cfg = SchemeConfig::new(SchemeKind::Fv, law(), visc(), 0.0, 0.05).unwrap();
        let (traj, _) = run(&m.initial_data(), 0.1, &cfg, &mesh).unwrap();
        let hist = relative_energy_history(&traj, &m, law(), visc()).unwrap();
        for (p, s) in hist.iter().zip(&traj.states) {
            let r = m.reference_state(&mesh, SchemeKind::Fv, s.time).unwrap();
            assert_eq!(p.relative_energy, relative_energy(&law(), s, &r.rho, &r.velocity).unwrap());
            assert!(p.relative_energy > 0.0);
        }
        assert!(hist[2].gradient_error > hist[1].gradient_error);
    }

    #[test]
    fn constant_state_errors_vanish() {
        let m = Manufactured::constant(law(), visc(), 1.2, &[0.3, -0.1]).unwrap();
        let problem = EocProblem {
            scheme: SchemeKind::Mac,
            epsilon: 0.0,
            solver: SolverOptions::default(),
            t_end: 0.1,
            solution: m,
        };
        let t = eoc_study(&problem, &[4, 8, 16], DtRule::Linear(1.0), EocReference::Exact).unwrap();
        for l in &t.levels {
            assert!(l.metrics().iter().all(|&e| (0.0..1e-13).contains(&e)), "{l:?}");
        }
        assert!(t.orders.iter().all(|(_, o)| o.is_none()));
        assert_eq!(
            eoc_study(&problem, &[4, 8], DtRule::Linear(1.0), EocReference::Exact),
            Err(Error::LadderTooShort { needed: 3, got: 2 })
        );
        assert!(eoc_study(&problem, &[8, 4, 16], DtRule::Linear(1.0), EocReference::Exact).is_err());
        assert!(eoc_study(&problem, &[4, 8, 16], DtRule::Linear(1.0), EocReference::FineGrid(24)).is_err());
    }

    #[test]
    fn injection_preserves_means() {
        let m = Manufactured::standard(law(), visc());
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let fine = m.reference_state(&Mesh::new(2, 16).unwrap(), kind, 0.2).unwrap();
            let coarse = Mesh::new(2, 4).unwrap();
            let s = inject(&fine, &coarse).unwrap();
            assert!((s.mass() - fine.mass()).abs() < 1e-14);
            // Averaging projections of the exact solution reproduces coarser projections.
            let direct = m.reference_state(&coarse, kind, 0.2).unwrap();
            for (a, b) in s.rho.values().iter().zip(direct.rho.values()) {
                assert!((a - b).abs() < 1e-13);
            }
            if kind == SchemeKind::Mac {
                assert_eq!(s.velocity.kind(), SchemeKind::Mac);
                let (Velocity::Staggered(x), Velocity::Staggered(y)) = (&s.velocity, &direct.velocity) else { unreachable!() };
                for i in 0..2 {
                    for (a, b) in x.component(i).iter().zip(y.component(i)) {
                        assert!((a - b).abs() < 1e-13);
                    }
                }
            }
        }
        let st = FluidState::new(CellField::constant(Mesh::new(2, 6).unwrap(), 1.0), Velocity::Collocated(CellVectorField::zeros(Mesh::new(2, 6).unwrap())), 0.0).unwrap();
        assert!(inject(&st, &Mesh::new(2, 4).unwrap()).is_err());
    }

    #[test]
    fn fine_grid_reference_runs() {
        let problem = EocProblem {
            scheme: SchemeKind::Fv,
            epsilon: 0.0,
            solver: SolverOptions::default(),
            t_end: 0.05,
            solution: Manufactured::standard(law(), visc()),
        };
        let t = eoc_study(&problem, &[4, 8, 16], DtRule::Linear(0.5), EocReference::FineGrid(32)).unwrap();
        assert_eq!(t.levels.len(), 3);
        assert!(t.levels.iter().all(|l| l.metrics().iter().all(|e| e.is_finite() && *e >= 0.0)));
        assert!(t.levels[2].relative_energy < t.levels[0].relative_energy);
    }
}
