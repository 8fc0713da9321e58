//! TOML run configuration. Every section is optional; missing keys take the
//! defaults below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use cns_core::analysis::eoc::{DtRule, EocReference};
use cns_core::schemes::{LinearSolverKind, SolverOptions};
use cns_core::{GasLaw, SchemeKind, ViscosityLaw};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("{0}")]
    Syntax(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid<T>(key: &'static str, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { key, reason: reason.into() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Run,
    Identities,
    Consistency,
    Rates,
    Eoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// Trigonometric manufactured solution with its sources.
    Manufactured,
    /// Asymmetric two-dimensional state used by the consistency study.
    Study,
    Constant,
    /// Seeded random trigonometric perturbation of the constant state.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum DtRuleName {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "h2")]
    H2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearName {
    Gmres,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Fv,
    Mac,
}

impl From<SchemeName> for SchemeKind {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Fv => SchemeKind::Fv,
            SchemeName::Mac => SchemeKind::Mac,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    command: Command,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    mesh: MeshSection,
    #[serde(default)]
    physics: PhysicsSection,
    #[serde(default)]
    scheme: SchemeSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    eoc: EocSection,
    #[serde(default)]
    consistency: ConsistencySection,
    #[serde(default)]
    rates: RatesSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub dim: usize,
    pub n: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { dim: 2, n: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub a: f64,
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection { a: 1.0, gamma: 2.0, mu: 0.1, lambda: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub kind: SchemeName,
    pub epsilon: f64,
    /// Fixed time step; overrides `dt_rule` when set.
    pub dt: Option<f64>,
    pub dt_rule: DtRuleName,
    pub dt_factor: f64,
    pub t_end: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection { kind: SchemeName::Fv, epsilon: 0.0, dt: None, dt_rule: DtRuleName::H, dt_factor: 1.0, t_end: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub linear: LinearName,
    pub linear_tolerance: f64,
    pub retry_halvings: u32,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            linear: LinearName::Gmres,
            linear_tolerance: d.linear_tolerance,
            retry_halvings: d.retry_halvings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub initial: Initial,
    pub rho0: f64,
    pub u0: Vec<f64>,
    /// Sup bound of the random density perturbation, relative to `rho0`.
    pub amplitude: f64,
    pub terms: usize,
    pub max_freq: i32,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { initial: Initial::Manufactured, rho0: 1.0, u0: Vec::new(), amplitude: 0.2, terms: 6, max_freq: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Write a state dump every this many steps; 0 writes only the final state.
    pub checkpoint_every: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { checkpoint_every: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EocSection {
    pub levels: Vec<usize>,
    /// Resolution of a fine-grid reference run; the exact solution when absent.
    pub reference_n: Option<usize>,
}

impl Default for EocSection {
    fn default() -> Self {
        EocSection { levels: vec![16, 32, 64], reference_n: None }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencySection {
    pub levels: Vec<usize>,
    pub tau: f64,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        ConsistencySection { levels: vec![8, 16, 32, 64], tau: 1.0 / 32.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub schemes: Vec<SchemeName>,
    pub dims: Vec<usize>,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            schemes: vec![SchemeName::Fv, SchemeName::Mac],
            dims: vec![2, 3],
            gammas: vec![1.2, 1.4, 1.6, 1.8, 2.0, 2.5, 3.0],
            epsilons: vec![-0.5, -0.25, 0.0, 0.5, 1.0],
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub mesh: MeshSection,
    pub law: GasLaw,
    pub visc: ViscosityLaw,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub dt_rule: DtRule,
    pub t_end: f64,
    pub solver: SolverOptions,
    pub data: DataSection,
    pub run: RunSection,
    pub eoc: EocSection,
    pub consistency: ConsistencySection,
    pub rates: RatesSection,
}

impl RunConfig {
    /// Replaces the ladder of the `eoc` or `consistency` command.
    pub fn with_levels(mut self, levels: Vec<usize>) -> Result<Self, ConfigError> {
        match self.command {
            Command::Eoc => {
                ladder("levels", &levels, 2)?;
                if let Some(r) = self.eoc.reference_n {
                    if r <= *levels.last().unwrap() || levels.iter().any(|&n| r % n != 0) {
                        return invalid("eoc.reference_n", "must be a proper multiple of every level");
                    }
                }
                self.eoc.levels = levels;
            }
            Command::Consistency => {
                ladder("levels", &levels, 2)?;
                self.consistency.levels = levels;
            }
            _ => return invalid("levels", "only the eoc and consistency commands take a ladder"),
        }
        Ok(self)
    }

    pub fn eoc_reference(&self) -> EocReference {
        self.eoc.reference_n.map_or(EocReference::Exact, EocReference::FineGrid)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: Raw = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    validate(raw)
}

fn finite(key: &'static str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() {
        Ok(x)
    } else {
        invalid(key, format!("must be finite, got {x}"))
    }
}

fn ladder(key: &'static str, levels: &[usize], min_n: usize) -> Result<(), ConfigError> {
    if levels.len() < 3 {
        return invalid(key, format!("needs at least 3 resolutions, got {}", levels.len()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(key, "resolutions must increase strictly");
    }
    if levels[0] < min_n {
        return invalid(key, format!("resolutions must be at least {min_n}"));
    }
    Ok(())
}

fn validate(raw: Raw) -> Result<RunConfig, ConfigError> {
    let p = &raw.physics;
    if !(finite("physics.gamma", p.gamma)? > 1.0) {
        return invalid("physics.gamma", format!("the adiabatic exponent must exceed 1, got {}", p.gamma));
    }
    if !(finite("physics.a", p.a)? > 0.0) {
        return invalid("physics.a", format!("must be positive, got {}", p.a));
    }
    if !(finite("physics.mu", p.mu)? > 0.0) {
        return invalid("physics.mu", format!("the shear viscosity must be positive, got {}", p.mu));
    }
    if !(finite("physics.lambda", p.lambda)? >= 0.0) {
        return invalid("physics.lambda", format!("must be nonnegative, got {}", p.lambda));
    }
    let s = &raw.scheme;
    if !(finite("scheme.epsilon", s.epsilon)? > -1.0) {
        return invalid("scheme.epsilon", format!("the upwind diffusion exponent must exceed -1, got {}", s.epsilon));
    }
    if !(finite("scheme.t_end", s.t_end)? > 0.0) {
        return invalid("scheme.t_end", format!("must be positive, got {}", s.t_end));
    }
    if !(finite("scheme.dt_factor", s.dt_factor)? > 0.0) {
        return invalid("scheme.dt_factor", format!("must be positive, got {}", s.dt_factor));
    }
    let dt_rule = match (s.dt, s.dt_rule) {
        (Some(dt), _) if !(finite("scheme.dt", dt)? > 0.0) => return invalid("scheme.dt", format!("must be positive, got {dt}")),
        (Some(dt), _) => DtRule::Fixed(dt),
        (None, DtRuleName::H) => DtRule::Linear(s.dt_factor),
        (None, DtRuleName::H2) => DtRule::Quadratic(s.dt_factor),
    };
    let m = &raw.mesh;
    if m.dim != 2 && m.dim != 3 {
        return invalid("mesh.dim", format!("must be 2 or 3, got {}", m.dim));
    }
    if m.n < 2 {
        return invalid("mesh.n", format!("must be at least 2, got {}", m.n));
    }
    let sv = &raw.solver;
    if !(finite("solver.tolerance", sv.tolerance)? > 0.0) {
        return invalid("solver.tolerance", format!("must be positive, got {}", sv.tolerance));
    }
    if !(finite("solver.linear_tolerance", sv.linear_tolerance)? > 0.0) {
        return invalid("solver.linear_tolerance", format!("must be positive, got {}", sv.linear_tolerance));
    }
    if sv.max_iterations == 0 {
        return invalid("solver.max_iterations", "must be at least 1");
    }
    let solver = SolverOptions {
        tolerance: sv.tolerance,
        max_iterations: sv.max_iterations,
        linear: match sv.linear {
            LinearName::Gmres => LinearSolverKind::LaggedGmres,
            LinearName::Direct => LinearSolverKind::Direct,
        },
        linear_tolerance: sv.linear_tolerance,
        retry_halvings: sv.retry_halvings,
        ..SolverOptions::default()
    };
    let d = &raw.data;
    if !(finite("data.rho0", d.rho0)? > 0.0) {
        return invalid("data.rho0", format!("must be positive, got {}", d.rho0));
    }
    if !d.u0.is_empty() && d.u0.len() != m.dim {
        return invalid("data.u0", format!("needs {} components, got {}", m.dim, d.u0.len()));
    }
    for &u in &d.u0 {
        finite("data.u0", u)?;
    }
    if !(finite("data.amplitude", d.amplitude)? >= 0.0 && d.amplitude < 1.0) {
        return invalid("data.amplitude", format!("must lie in [0, 1), got {}", d.amplitude));
    }
    if d.max_freq < 0 {
        return invalid("data.max_freq", "must be nonnegative");
    }
    if d.initial == Initial::Study && m.dim != 2 {
        return invalid("data.initial", "the study state is two-dimensional");
    }
    match raw.command {
        Command::Eoc => {
            if d.initial != Initial::Manufactured {
                return invalid("data.initial", "eoc studies need the manufactured solution");
            }
            ladder("eoc.levels", &raw.eoc.levels, 2)?;
            if let Some(r) = raw.eoc.reference_n {
                let top = *raw.eoc.levels.last().unwrap();
                if r <= top || raw.eoc.levels.iter().any(|&n| r % n != 0) {
                    return invalid("eoc.reference_n", "must be a proper multiple of every level");
                }
            }
        }
        Command::Consistency => {
            ladder("consistency.levels", &raw.consistency.levels, 2)?;
            if m.dim != 2 {
                return invalid("mesh.dim", "the consistency study is two-dimensional");
            }
            let tau = raw.consistency.tau;
            if !(finite("consistency.tau", tau)? > 0.0) {
                return invalid("consistency.tau", format!("must be positive, got {tau}"));
            }
        }
        Command::Rates => {
            let r = &raw.rates;
            if r.schemes.is_empty() || r.dims.is_empty() || r.gammas.is_empty() || r.epsilons.is_empty() {
                return invalid("rates", "every grid needs at least one value");
            }
            if let Some(&bad) = r.dims.iter().find(|&&d| d != 2 && d != 3) {
                return invalid("rates.dims", format!("must be 2 or 3, got {bad}"));
            }
            if let Some(&bad) = r.gammas.iter().find(|&&g| !(g > 1.0) || !g.is_finite()) {
                return invalid("rates.gammas", format!("the adiabatic exponent must exceed 1, got {bad}"));
            }
            if let Some(&bad) = r.epsilons.iter().find(|&&e| !(e > -1.0) || !e.is_finite()) {
                return invalid("rates.epsilons", format!("the upwind diffusion exponent must exceed -1, got {bad}"));
            }
        }
        Command::Run | Command::Identities => {}
    }
    let law = GasLaw::new(p.a, p.gamma).map_err(|e| ConfigError::Invalid { key: "physics", reason: e.to_string() })?;
    let visc =
        ViscosityLaw::new(p.mu, p.lambda).map_err(|e| ConfigError::Invalid { key: "physics", reason: e.to_string() })?;
    Ok(RunConfig {
        command: raw.command,
        seed: raw.seed.unwrap_or(0),
        out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
        mesh: raw.mesh,
        law,
        visc,
        scheme: s.kind.into(),
        epsilon: s.epsilon,
        dt_rule,
        t_end: s.t_end,
        solver,
        data: raw.data,
        run: raw.run,
        eoc: raw.eoc,
        consistency: raw.consistency,
        rates: raw.rates,
    })
}
