use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::state::FluidState;

use super::assembly::{Neighbors, System};
use super::config::SchemeConfig;
use super::linear::{LinearSolver, LinearStats};

const MAX_HALVINGS: usize = 30;
/// Non-decreasing iterations tolerated before every step must reduce the residual.
const STALL_LIMIT: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    /// Max-norm of the residual at the accepted iterate.
    pub residual: f64,
    pub factorizations: usize,
    pub linear_iterations: usize,
    /// Half steps taken by the retry rule; 0 when the step went through as one.
    pub substeps: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Implicit step driver. Keeps the Jacobian pattern, symbolic factorization and the
/// lagged numeric LU alive between steps of one run.
pub struct Stepper {
    mesh: Mesh,
    cfg: SchemeConfig,
    nb: Option<Neighbors>,
    linear: LinearSolver,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Stepper {
    pub fn new(mesh: Mesh, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let s = &cfg.solver;
        let linear = LinearSolver::new(s.linear, s.linear_tolerance, s.lagged_iterations);
        Ok(Stepper { mesh, cfg, nb: Some(Neighbors::new(&mesh)), linear, rows: vec![], cols: vec![], vals: vec![] })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Advances `prev` by `dt`, splitting into half steps on solver failure as many
    /// times as the retry setting allows.
    pub fn step(&mut self, prev: &FluidState, dt: f64) -> Result<(FluidState, NewtonStats)> {
        self.advance(prev, dt, self.cfg.solver.retry_halvings)
    }

    fn advance(&mut self, prev: &FluidState, dt: f64, retries: u32) -> Result<(FluidState, NewtonStats)> {
        match self.solve(prev, dt) {
            Err(e) if retries > 0 && e.is_solver_failure() => {
                let (mid, a) = self.advance(prev, 0.5 * dt, retries - 1)?;
                let (end, b) = self.advance(&mid, 0.5 * dt, retries - 1)?;
                Ok((
                    end,
                    NewtonStats {
                        iterations: a.iterations + b.iterations,
                        residual: b.residual,
                        factorizations: a.factorizations + b.factorizations,
                        linear_iterations: a.linear_iterations + b.linear_iterations,
                        substeps: a.substeps.max(1) + b.substeps.max(1),
                    },
                ))
            }
            other => other,
        }
    }

    fn solve(&mut self, prev: &FluidState, dt: f64) -> Result<(FluidState, NewtonStats)> {
        if prev.mesh() != &self.mesh {
            return Err(Error::MeshMismatch);
        }
        prev.check_positive()?;
        let t_new = prev.time + dt;
        let nb = self.nb.take().unwrap_or_else(|| Neighbors::new(&self.mesh));
        let sys = System::with_neighbors(prev, &self.cfg, dt, t_new, nb)?;
        let out = self.newton(&sys, prev, t_new);
        self.nb = Some(sys.into_neighbors());
        out
    }

    fn newton(&mut self, sys: &System, prev: &FluidState, t_new: f64) -> Result<(FluidState, NewtonStats)> {
        let n = self.mesh.cell_count();
        let len = sys.len();
        let opts = self.cfg.solver;
        let before = self.linear.stats;
        let mut x = prev.pack();
        let mut r = vec![0.0; len];
        sys.residual(&x, &mut r);
        let mut rn = max_norm(&r);
        let mut iterations = 0;
        let mut stalled = 0;
        let mut damped = false;
        let mut xt = vec![0.0; len];
        let mut rt = vec![0.0; len];
        loop {
            if !rn.is_finite() {
                return Err(Error::NonlinearDivergence { iterations, residual: rn });
            }
            if rn <= opts.tolerance {
                return Ok(self.finish(x, iterations, rn, before, t_new));
            }
            if iterations >= opts.max_iterations {
                return Err(Error::NonlinearDivergence { iterations, residual: rn });
            }
            let a = self.assemble(sys, &x)?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = self.linear.solve(&a, &rhs)?;
            iterations += 1;

            let mut lambda = 1.0;
            let mut positive_seen = false;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                xt.iter_mut().zip(x.iter().zip(&dx)).for_each(|(t, (a, b))| *t = a + lambda * b);
                if xt[..n].iter().all(|&v| v > 0.0) {
                    positive_seen = true;
                    sys.residual(&xt, &mut rt);
                    let rtn = max_norm(&rt);
                    if !damped || rtn < rn {
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                if !positive_seen {
                    return Err(Error::PositivityLoss);
                }
                // Damped mode found no decrease: the iterate already sits at the
                // round-off level of the residual, or the solve has failed.
                if dx_is_roundoff(&x, &dx) {
                    return Ok(self.finish(x, iterations, rn, before, t_new));
                }
                return Err(Error::NonlinearDivergence { iterations, residual: rn });
            }
            let rtn = max_norm(&rt);
            stalled = if rtn >= rn { stalled + 1 } else { 0 };
            if stalled >= STALL_LIMIT {
                damped = true;
            }
            let tiny = dx_is_roundoff(&x, &dx);
            std::mem::swap(&mut x, &mut xt);
            std::mem::swap(&mut r, &mut rt);
            rn = rtn;
            if tiny && lambda == 1.0 && rn > opts.tolerance {
                // A full Newton update at round-off size cannot improve further.
                return Ok(self.finish(x, iterations, rn, before, t_new));
            }
        }
    }

    fn finish(&self, x: Vec<f64>, iterations: usize, residual: f64, before: LinearStats, t_new: f64) -> (FluidState, NewtonStats) {
        let linear = self.linear.stats;
        let state = FluidState::unpack(&self.mesh, self.cfg.scheme, &x, t_new);
        let stats = NewtonStats {
            iterations,
            residual,
            factorizations: linear.factorizations - before.factorizations,
            linear_iterations: linear.gmres_iterations - before.gmres_iterations,
            substeps: 0,
        };
        (state, stats)
    }

    fn assemble(&mut self, sys: &System, x: &[f64]) -> Result<super::linear::Matrix> {
        self.vals.clear();
        if !self.linear.has_pattern() {
            self.rows.clear();
            self.cols.clear();
            let (rows, cols, vals) = (&mut self.rows, &mut self.cols, &mut self.vals);
            sys.jacobian(x, &mut |r, c, v| {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            });
            self.linear.set_pattern(sys.len(), &self.rows, &self.cols)?;
            self.rows = Vec::new();
            self.cols = Vec::new();
        } else {
            let vals = &mut self.vals;
            sys.jacobian(x, &mut |_, _, v| vals.push(v));
        }
        self.linear.matrix(&self.vals)
    }
}

fn dx_is_roundoff(x: &[f64], dx: &[f64]) -> bool {
    max_norm(dx) <= 16.0 * f64::EPSILON * max_norm(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CellField, CellVectorField, StaggeredField};
    use crate::physics::{GasLaw, ViscosityLaw};
    use crate::schemes::config::{LinearSolverKind, SolverOptions};
    use crate::state::{SchemeKind, Velocity};

    fn smooth_state(m: Mesh, kind: SchemeKind) -> FluidState {
        let tau = std::f64::consts::TAU;
        let rho = CellField::from_fn(m, |k| {
            let x = m.cell_center(k);
            1.0 + 0.2 * (tau * x[0]).sin() * (tau * x[1]).cos()
        });
        let v = match kind {
            SchemeKind::Fv => Velocity::Collocated(
                CellVectorField::new(
                    (0..m.dim())
                        .map(|i| CellField::from_fn(m, |k| 0.3 * (tau * m.cell_center(k)[(i + 1) % m.dim()]).sin()))
                        .collect(),
                )
                .unwrap(),
            ),
            SchemeKind::Mac => Velocity::Staggered(StaggeredField::from_fn(m, |f| {
                0.3 * (tau * m.face_center(f)[(f.dir + 1) % m.dim()]).sin()
            })),
        };
        FluidState::new(rho, v, 0.0).unwrap()
    }

    fn config(kind: SchemeKind, linear: LinearSolverKind) -> SchemeConfig {
        SchemeConfig::new(kind, GasLaw::new(1.0, 1.4).unwrap(), ViscosityLaw::new(0.05, 0.0).unwrap(), 0.0, 1.0 / 16.0)
            .unwrap()
            .with_solver(SolverOptions { linear, ..SolverOptions::default() })
    }

    #[test]
    fn constant_state_takes_no_iterations() {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let m = Mesh::new(2, 8).unwrap();
            let v = match kind {
                SchemeKind::Fv => Velocity::Collocated(CellVectorField::constant(m, &[0.5, -0.25])),
                SchemeKind::Mac => Velocity::Staggered(StaggeredField::constant(m, &[0.5, -0.25])),
            };
            let s0 = FluidState::new(CellField::constant(m, 1.5), v, 0.0).unwrap();
            let mut st = Stepper::new(m, config(kind, LinearSolverKind::LaggedGmres)).unwrap();
            let (s1, stats) = st.step(&s0, 0.1).unwrap();
            assert_eq!(stats.iterations, 0);
            assert_eq!(s1.rho, s0.rho);
            assert_eq!(s1.velocity, s0.velocity);
        }
    }

    #[test]
    fn smooth_step_converges_and_conserves_mass() {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            for linear in [LinearSolverKind::Direct, LinearSolverKind::LaggedGmres] {
                let m = Mesh::new(2, 16).unwrap();
                let s0 = smooth_state(m, kind);
                let mut st = Stepper::new(m, config(kind, linear)).unwrap();
                let (s1, stats) = st.step(&s0, 1.0 / 16.0).unwrap();
                assert!(stats.residual <= 1e-10, "{kind:?} {linear:?}: {}", stats.residual);
                assert!(stats.iterations >= 2 && stats.iterations < 15);
                assert!((s1.mass() - s0.mass()).abs() <= 1e-9);
                assert!(s1.min_density() > 0.0);
                let (_, again) = st.step(&s1, 1.0 / 16.0).unwrap();
                if linear == LinearSolverKind::LaggedGmres {
                    assert!(again.factorizations <= again.iterations);
                }
            }
        }
    }

    #[test]
    fn three_dimensional_step() {
        for kind in [SchemeKind::Fv, SchemeKind::Mac] {
            let m = Mesh::new(3, 6).unwrap();
            let s0 = smooth_state(m, kind);
            let mut st = Stepper::new(m, config(kind, LinearSolverKind::LaggedGmres)).unwrap();
            let (s1, stats) = st.step(&s0, 0.1).unwrap();
            assert!(stats.residual <= 1e-10);
            assert!((s1.mass() - s0.mass()).abs() <= 1e-9);
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = Mesh::new(2, 8).unwrap();
        let s0 = smooth_state(m, SchemeKind::Fv);
        let mut cfg = config(SchemeKind::Fv, LinearSolverKind::Direct);
        cfg.solver.max_iterations = 1;
        cfg.solver.tolerance = 1e-14;
        let mut st = Stepper::new(m, cfg.clone()).unwrap();
        let err = st.step(&s0, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonlinearDivergence { iterations: 1, .. }));
        cfg.solver.retry_halvings = 1;
        let mut st = Stepper::new(m, cfg).unwrap();
        assert!(st.step(&s0, 0.1).unwrap_err().is_solver_failure());
    }
}
