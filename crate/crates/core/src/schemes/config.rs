use crate::error::{Error, Result};
use crate::physics::{GasLaw, ViscosityLaw};
use crate::smooth::SharedFn;
use crate::state::SchemeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Fresh sparse LU every Newton iteration.
    Direct,
    /// GMRES preconditioned by the most recent LU, refactored when it stops paying off.
    LaggedGmres,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on the max-norm of the combined residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub linear: LinearSolverKind,
    /// Relative residual reduction required from each linear solve.
    pub linear_tolerance: f64,
    /// GMRES iterations allowed with a stale preconditioner before refactoring.
    pub lagged_iterations: usize,
    /// Times a failed step may be retried as two half steps. 0 keeps `dt` fixed.
    pub retry_halvings: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 50,
            linear: LinearSolverKind::LaggedGmres,
            linear_tolerance: 1e-10,
            lagged_iterations: 10,
            retry_halvings: 0,
        }
    }
}

/// Manufactured right-hand sides, evaluated at the new time level.
#[derive(Clone, Default)]
pub struct Sources {
    pub mass: Option<SharedFn>,
    /// One function per velocity component.
    pub momentum: Option<Vec<SharedFn>>,
}

impl std::fmt::Debug for Sources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sources")
            .field("mass", &self.mass.is_some())
            .field("momentum", &self.momentum.as_ref().map(Vec::len))
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub law: GasLaw,
    pub visc: ViscosityLaw,
    pub epsilon: f64,
    /// Target step; `run` shrinks it so that it divides the horizon.
    pub dt: f64,
    pub solver: SolverOptions,
    pub sources: Sources,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, law: GasLaw, visc: ViscosityLaw, epsilon: f64, dt: f64) -> Result<Self> {
        let cfg = SchemeConfig { scheme, law, visc, epsilon, dt, solver: SolverOptions::default(), sources: Sources::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_sources(mut self, sources: Sources) -> Self {
        self.sources = sources;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.epsilon > -1.0) || !self.epsilon.is_finite() {
            return bad("epsilon", format!("must exceed -1, got {}", self.epsilon));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.solver.tolerance > 0.0) {
            return bad("tolerance", format!("must be positive, got {}", self.solver.tolerance));
        }
        if self.solver.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1".into());
        }
        if !(self.solver.linear_tolerance > 0.0 && self.solver.linear_tolerance < 1.0) {
            return bad("linear_tolerance", format!("must lie in (0, 1), got {}", self.solver.linear_tolerance));
        }
        Ok(())
    }
}
