use crate::error::{Error, Result};
use crate::fields::{CellVectorField, StaggeredField};
use crate::mesh::Mesh;
use crate::ops;
use crate::physics::{dissipation, total_energy};
use crate::smooth::{FnSmooth, SharedFn, SmoothFunction};
use crate::state::{FluidState, SchemeKind, Velocity};

use super::config::SchemeConfig;
use super::newton::Stepper;

/// Initial density and velocity. `momentum`, when given, must equal `rho * u_i`; it
/// lets exactly integrable data keep exact projections of the product.
#[derive(Clone)]
pub struct InitialData {
    pub rho: SharedFn,
    pub velocity: Vec<SharedFn>,
    pub momentum: Option<Vec<SharedFn>>,
}

impl InitialData {
    pub fn new(rho: SharedFn, velocity: Vec<SharedFn>) -> Self {
        InitialData { rho, velocity, momentum: None }
    }
}

struct Product<'a>(&'a dyn SmoothFunction, &'a dyn SmoothFunction);

impl SmoothFunction for Product<'_> {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.0.value(t, x) * self.1.value(t, x)
    }
}

/// `rho_h^0 = Pi_Q rho_0`. FV: `u_h^0 = Pi_Q[rho_0 u_0] / rho_h^0`. MAC: each face
/// gets `Pi_E^(i) u_{0,i}`.
pub fn initial_state(data: &InitialData, mesh: &Mesh, kind: SchemeKind, t0: f64) -> Result<FluidState> {
    let d = mesh.dim();
    if data.velocity.len() != d {
        return Err(Error::LengthMismatch { expected: d, got: data.velocity.len() });
    }
    let rho = ops::project_q(data.rho.as_ref(), t0, mesh);
    let state = FluidState { rho, velocity: Velocity::Collocated(CellVectorField::zeros(*mesh)), time: t0 };
    state.check_positive()?;
    let velocity = match kind {
        SchemeKind::Fv => {
            let comps = (0..d)
                .map(|i| {
                    let m = match &data.momentum {
                        Some(ms) => ops::project_q(ms[i].as_ref(), t0, mesh),
                        None => ops::project_q(&Product(data.rho.as_ref(), data.velocity[i].as_ref()), t0, mesh),
                    };
                    m.zip_map(&state.rho, |q, r| q / r)
                })
                .collect();
            Velocity::Collocated(CellVectorField::new(comps)?)
        }
        SchemeKind::Mac => Velocity::Staggered(StaggeredField::new(
            *mesh,
            (0..d).map(|i| ops::project_e_component(data.velocity[i].as_ref(), i, t0, mesh)).collect(),
        )?),
    };
    Ok(FluidState { velocity, ..state })
}

/// Constant initial data, handy for smoke tests.
pub fn constant_data(rho: f64, u: &[f64]) -> InitialData {
    let vel = u.iter().map(|&c| -> SharedFn { std::sync::Arc::new(FnSmooth(move |_t: f64, _x: &[f64]| c)) }).collect();
    InitialData::new(std::sync::Arc::new(FnSmooth(move |_t: f64, _x: &[f64]| rho)), vel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub n: usize,
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_speed: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// `E^n - E^(n-1) + dt D^n`; non-positive for an exact solution without sources.
    pub slack: f64,
    pub factorizations: usize,
    pub linear_iterations: usize,
}

impl StepReport {
    fn initial(s: &FluidState, cfg: &SchemeConfig) -> Self {
        StepReport {
            n: 0,
            t: s.time,
            iterations: 0,
            residual: 0.0,
            mass: s.mass(),
            min_rho: s.min_density(),
            max_rho: s.rho.max(),
            max_speed: s.velocity.max_speed(),
            energy: total_energy(s, &cfg.law),
            dissipation: dissipation(s, &cfg.visc),
            slack: 0.0,
            factorizations: 0,
            linear_iterations: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub dt: f64,
    /// Row 0 describes the initial state.
    pub steps: Vec<StepReport>,
}

impl RunReport {
    pub fn initial(&self) -> &StepReport {
        &self.steps[0]
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.initial().mass;
        self.steps.iter().fold(0.0, |m, s| m.max((s.mass - m0).abs()))
    }

    /// Largest `E^n + sum_{k<=n} dt D^k - E^0` over the run.
    pub fn max_energy_excess(&self) -> f64 {
        let e0 = self.initial().energy;
        let mut acc = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for s in &self.steps[1..] {
            acc += self.dt * s.dissipation;
            worst = worst.max(s.energy + acc - e0);
        }
        worst
    }

    /// True when `E^n + sum dt D^k <= E^0 + n tol` at every step.
    pub fn energy_inequality_holds(&self, tol: f64) -> bool {
        let e0 = self.initial().energy;
        let mut acc = 0.0;
        self.steps[1..].iter().all(|s| {
            acc += self.dt * s.dissipation;
            s.energy + acc <= e0 + s.n as f64 * tol
        })
    }

    pub fn min_density(&self) -> f64 {
        self.steps.iter().fold(f64::INFINITY, |m, s| m.min(s.min_rho))
    }

    pub fn max_density(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.max_rho))
    }

    pub fn max_speed(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.max_speed))
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

/// Kept states; `states[0]` is the initial state and the final state is always kept.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<FluidState>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.time)
    }

    pub fn final_state(&self) -> &FluidState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Every stored state with its step index, assuming none were thinned out.
    pub fn is_complete(&self) -> bool {
        self.states.windows(2).all(|w| ((w[1].time - w[0].time) - self.dt).abs() <= 1e-9 * self.dt.max(1.0))
    }
}

/// Step count and step size for a horizon: `dt` shrinks so that it divides `t_end`.
pub fn time_grid(t_end: f64, dt_target: f64) -> Result<(usize, f64)> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter { name: "t_end", reason: format!("must be nonnegative, got {t_end}") });
    }
    if !(dt_target > 0.0) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt_target}") });
    }
    if t_end == 0.0 {
        return Ok((0, dt_target));
    }
    let steps = ((t_end / dt_target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

/// Runs the scheme from projected initial data to `t_end`, keeping every
/// `keep_every`-th state (0 keeps only the first and last) and calling `observe` on
/// each accepted state, the initial one included.
pub fn run_observed(
    data: &InitialData,
    t_end: f64,
    cfg: &SchemeConfig,
    mesh: &Mesh,
    keep_every: usize,
    observe: &mut dyn FnMut(&FluidState, &StepReport) -> Result<()>,
) -> Result<(Trajectory, RunReport)> {
    cfg.validate()?;
    let (steps, dt) = time_grid(t_end, cfg.dt)?;
    let mut state = initial_state(data, mesh, cfg.scheme, 0.0)?;
    let mut stepper = Stepper::new(*mesh, cfg.clone())?;
    let first = StepReport::initial(&state, cfg);
    observe(&state, &first)?;
    let mut report = RunReport { scheme: cfg.scheme, dt, steps: vec![first] };
    let mut kept = vec![state.clone()];
    for n in 1..=steps {
        let (mut next, stats) = stepper.step(&state, dt).map_err(|e| Error::StepFailed { step: n, source: Box::new(e) })?;
        // Pin the clock to the grid so that long runs do not drift.
        next.time = n as f64 * dt;
        let energy = total_energy(&next, &cfg.law);
        let diss = dissipation(&next, &cfg.visc);
        let prev_energy = report.steps[n - 1].energy;
        let row = StepReport {
            n,
            t: next.time,
            iterations: stats.iterations,
            residual: stats.residual,
            mass: next.mass(),
            min_rho: next.min_density(),
            max_rho: next.rho.max(),
            max_speed: next.velocity.max_speed(),
            energy,
            dissipation: diss,
            slack: energy - prev_energy + dt * diss,
            factorizations: stats.factorizations,
            linear_iterations: stats.linear_iterations,
        };
        observe(&next, &row)?;
        report.steps.push(row);
        if n == steps || (keep_every > 0 && n % keep_every == 0) {
            kept.push(next.clone());
        }
        state = next;
    }
    Ok((Trajectory { dt, states: kept }, report))
}

/// `run_observed` keeping every state.
pub fn run(data: &InitialData, t_end: f64, cfg: &SchemeConfig, mesh: &Mesh) -> Result<(Trajectory, RunReport)> {
    run_observed(data, t_end, cfg, mesh, 1, &mut |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{GasLaw, ViscosityLaw};
    use crate::smooth::{shared, Factor, TrigPoly};
    use std::sync::Arc;

    fn cfg(kind: SchemeKind, dt: f64) -> SchemeConfig {
        SchemeConfig::new(kind, GasLaw::new(1.0, 2.0).unwrap(), ViscosityLaw::new(0.1, 0.0).unwrap(), 0.0, dt).unwrap()
    }

    #[test]
    fn time_grid_divides_horizon() {
        assert_eq!(time_grid(0.1, 1.0 / 32.0).unwrap(), (4, 0.025));
        assert_eq!(time_grid(1.0, 0.25).unwrap(), (4, 0.25));
        assert_eq!(time_grid(0.0, 0.1).unwrap().0, 0);
        assert!(time_grid(-1.0, 0.1).is_err());
    }

    #[test]
    fn zero_horizon_returns_projection() {
        let m = Mesh::new(2, 4).unwrap();
        let data = constant_data(1.0, &[0.0, 0.0]);
        let (traj, rep) = run(&data, 0.0, &cfg(SchemeKind::Fv, 0.1), &m).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(rep.steps.len(), 1);
    }

    #[test]
    fn constant_data_stays_constant() {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let m = Mesh::new(2, 6).unwrap();
            let data = constant_data(1.2, &[0.4, -0.1]);
            let (traj, rep) = run(&data, 0.3, &cfg(kind, 0.1), &m).unwrap();
            assert_eq!(traj.states.len(), 4);
            for s in &traj.states {
                assert_eq!(s.rho, traj.states[0].rho);
                assert_eq!(s.velocity, traj.states[0].velocity);
            }
            assert_eq!(rep.total_iterations(), 0);
        }
    }

    #[test]
    fn initial_projection_matches_definitions() {
        let m = Mesh::new(2, 8).unwrap();
        let rho = TrigPoly::constant(2, 2.0).add(&TrigPoly::term(2, 0.5, Factor::ONE, &[Factor::sin(1), Factor::cos(1)]));
        let u1 = TrigPoly::term(2, 0.3, Factor::ONE, &[Factor::ONE, Factor::sin(1)]);
        let u2 = TrigPoly::term(2, -0.2, Factor::ONE, &[Factor::cos(1), Factor::ONE]);
        let data = InitialData {
            rho: Arc::new(rho.clone()),
            velocity: vec![Arc::new(u1.clone()), Arc::new(u2.clone())],
            momentum: Some(vec![Arc::new(rho.mul(&u1)), Arc::new(rho.mul(&u2))]),
        };
        let fv = initial_state(&data, &m, SchemeKind::Fv, 0.0).unwrap();
        let want = ops::project_q(&rho.mul(&u1), 0.0, &m);
        let got = fv.momentum();
        for k in m.cells() {
            assert!((got.component(0).values()[k] - want.values()[k]).abs() < 1e-14);
        }
        // Without the exact product the quadrature route agrees closely.
        let approx = initial_state(&InitialData { momentum: None, ..data.clone() }, &m, SchemeKind::Fv, 0.0).unwrap();
        let Velocity::Collocated(a) = &approx.velocity else { unreachable!() };
        let Velocity::Collocated(b) = &fv.velocity else { unreachable!() };
        assert!(a.component(0).values().iter().zip(b.component(0).values()).all(|(x, y)| (x - y).abs() < 1e-7));
        let mac = initial_state(&data, &m, SchemeKind::Mac, 0.0).unwrap();
        let Velocity::Staggered(w) = &mac.velocity else { unreachable!() };
        assert_eq!(w.component(1), ops::project_e_component(&u2, 1, 0.0, &m).as_slice());
        assert!(initial_state(&constant_data(-1.0, &[0.0, 0.0]), &m, SchemeKind::Fv, 0.0).is_err());
    }

    #[test]
    fn smooth_run_is_stable() {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let m = Mesh::new(2, 16).unwrap();
            let rho = shared(|_, x: &[f64]| 1.0 + 0.3 * (std::f64::consts::TAU * x[0]).sin());
            let u1 = shared(|_, x: &[f64]| 0.5 * (std::f64::consts::TAU * x[1]).sin());
            let u2 = shared(|_, x: &[f64]| 0.2 * (std::f64::consts::TAU * x[0]).cos());
            let data = InitialData::new(rho, vec![u1, u2]);
            let (traj, rep) = run(&data, 0.1, &cfg(kind, m.h()), &m).unwrap();
            assert_eq!(traj.states.len(), rep.steps.len());
            assert!(traj.is_complete());
            assert!(rep.max_mass_drift() <= 1e-9);
            assert!(rep.min_density() > 0.0);
            assert!(rep.energy_inequality_holds(1e-9), "{kind:?}: {}", rep.max_energy_excess());
            assert!((traj.end_time() - 0.1).abs() < 1e-15);
        }
    }
}
