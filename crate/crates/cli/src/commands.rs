use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use cns_core::analysis::consistency::{consistency_study, study_initial_data};
use cns_core::analysis::eoc::{eoc_study, fit_order, EocProblem};
use cns_core::analysis::manufactured::Manufactured;
use cns_core::analysis::rates::{predict_rate, RateTable};
use cns_core::identities::ibp_identity_suite;
use cns_core::io::{order_rows, write_csv, write_state, CsvStream};
use cns_core::schemes::{constant_data, run_observed, InitialData, SchemeConfig, Sources, StepReport};
use cns_core::smooth::random_trig;
use cns_core::{Error, Mesh, TrigPoly};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, ConfigError, Initial, RunConfig};

/// Why a command stopped; each kind has its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else if let Error::Io(s) = e {
            Failure::Io(s)
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Runs the configured command, writing its files under `cfg.out` and a summary to `log`.
pub fn execute(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    fs::create_dir_all(&cfg.out).map_err(|e| Failure::Io(format!("{}: {e}", cfg.out.display())))?;
    match cfg.command {
        Command::Run => run(cfg, log),
        Command::Identities => identities(cfg, log),
        Command::Consistency => consistency(cfg, log),
        Command::Rates => rates(cfg, log),
        Command::Eoc => eoc(cfg, log),
    }
}

fn manufactured(cfg: &RunConfig) -> Manufactured {
    if cfg.mesh.dim == 2 {
        Manufactured::standard(cfg.law, cfg.visc)
    } else {
        Manufactured::standard_3d(cfg.law, cfg.visc)
    }
}

fn random_data(cfg: &RunConfig) -> InitialData {
    let d = cfg.mesh.dim;
    let data = &cfg.data;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Each term is bounded by 1 in absolute value.
    let terms = data.terms.max(1);
    let unit = |rng: &mut ChaCha8Rng| random_trig(d, terms, data.max_freq, rng).scale(1.0 / terms as f64);
    let rho = TrigPoly::constant(d, data.rho0).add(&unit(&mut rng).scale(data.amplitude * data.rho0));
    let u: Vec<_> = (0..d)
        .map(|i| {
            let c = data.u0.get(i).copied().unwrap_or(0.0);
            Arc::new(TrigPoly::constant(d, c).add(&unit(&mut rng).scale(0.5))) as _
        })
        .collect();
    InitialData::new(Arc::new(rho), u)
}

fn initial(cfg: &RunConfig) -> (InitialData, Sources) {
    match cfg.data.initial {
        Initial::Manufactured => {
            let m = manufactured(cfg);
            (m.initial_data(), m.sources())
        }
        Initial::Study => (study_initial_data(), Sources::default()),
        Initial::Constant => {
            let mut u = cfg.data.u0.clone();
            u.resize(cfg.mesh.dim, 0.0);
            (constant_data(cfg.data.rho0, &u), Sources::default())
        }
        Initial::Random => (random_data(cfg), Sources::default()),
    }
}

fn scheme_config(cfg: &RunConfig, h: f64) -> Result<SchemeConfig, Failure> {
    Ok(SchemeConfig::new(cfg.scheme, cfg.law, cfg.visc, cfg.epsilon, cfg.dt_rule.dt(h))?.with_solver(cfg.solver))
}

/// Writes `steps.csv`, optional checkpoints and `final_state.txt`. Without sources the
/// mass and energy balances are checked against `10 tolerance` per step.
fn run(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    let mesh = Mesh::new(cfg.mesh.dim, cfg.mesh.n)?;
    let (data, sources) = initial(cfg);
    let has_sources = sources.mass.is_some() || sources.momentum.is_some();
    let sc = scheme_config(cfg, mesh.h())?.with_sources(sources);
    let mut steps = CsvStream::<_, StepReport>::new(create(&cfg.out, "steps.csv")?)?;
    let every = cfg.run.checkpoint_every;
    let result = run_observed(&data, cfg.t_end, &sc, &mesh, 0, &mut |state, row| {
        steps.push(row)?;
        if every > 0 && row.n % every == 0 {
            let mut w = create(&cfg.out, &format!("checkpoint_{:06}.txt", row.n)).map_err(|e| Error::Io(e.to_string()))?;
            write_state(&mut w, state)?;
            w.flush()?;
        }
        Ok(())
    });
    let (traj, report) = result?;
    let mut w = create(&cfg.out, "final_state.txt")?;
    write_state(&mut w, traj.final_state())?;
    w.flush()?;
    let last = report.steps.last().expect("initial row");
    writeln!(log, "scheme {} N {} steps {} dt {:e}", cfg.scheme.name(), cfg.mesh.n, last.n, report.dt)?;
    writeln!(log, "min rho {:e} max rho {:e} max |u| {:e}", report.min_density(), report.max_density(), report.max_speed())?;
    writeln!(log, "mass drift {:e} newton iterations {}", report.max_mass_drift(), report.total_iterations())?;
    if !has_sources {
        let tol = 10.0 * cfg.solver.tolerance;
        let m0 = report.initial().mass;
        if let Some(s) = report.steps.iter().find(|s| (s.mass - m0).abs() > tol) {
            return Err(Failure::Invariant(format!("mass drift {:e} at step {}", s.mass - m0, s.n)));
        }
        if !report.energy_inequality_holds(tol) {
            return Err(Failure::Invariant(format!("energy grows by {:e}", report.max_energy_excess())));
        }
    }
    Ok(())
}

/// Writes `identities.csv`; any failed identity is an invariant violation.
fn identities(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    let mesh = Mesh::new(cfg.mesh.dim, cfg.mesh.n)?;
    let report = ibp_identity_suite(&mesh, cfg.seed);
    write_csv(create(&cfg.out, "identities.csv")?, &report.rows)?;
    writeln!(log, "{:<28}{:>12}{:>8}", "identity", "relative", "ok")?;
    for r in &report.rows {
        writeln!(log, "{:<28}{:>12.3e}{:>8}", r.name, r.relative(), r.passed())?;
    }
    writeln!(log, "d {} N {} seed {} max relative {:e}", report.dim, report.n, report.seed, report.max_relative())?;
    match report.rows.iter().find(|r| !r.passed()) {
        Some(r) => Err(Failure::Invariant(format!("identity {} off by {:e}", r.name, r.abs_diff))),
        None => Ok(()),
    }
}

/// Writes `consistency.csv`: the study state with `dt = h^2`, residuals at `tau`.
fn consistency(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    let c = &cfg.consistency;
    let reports = consistency_study(cfg.scheme, cfg.law, cfg.visc, cfg.epsilon, cfg.solver, &c.levels, c.tau)?;
    write_csv(create(&cfg.out, "consistency.csv")?, &reports)?;
    let hs: Vec<f64> = reports.iter().map(|r| r.h).collect();
    let order = |f: &dyn Fn(&cns_core::analysis::consistency::ConsistencyReport) -> f64| {
        fit_order(&hs, &reports.iter().map(|r| f(r).abs()).collect::<Vec<_>>())
    };
    let predicted = predict_rate(cfg.scheme, 2, cfg.law.gamma(), cfg.epsilon)?;
    writeln!(log, "{:>6}{:>14}{:>14}", "N", "|e_rho|", "|e_m|")?;
    for r in &reports {
        writeln!(log, "{:>6}{:>14.4e}{:>14.4e}", (1.0 / r.h).round(), r.e_rho.abs(), r.e_m.abs())?;
    }
    let show = |o: Option<f64>| o.map_or("undefined".to_string(), |o| format!("{o:.4}"));
    writeln!(log, "order e_rho {} e_m {} predicted {:.4}", show(order(&|r| r.e_rho)), show(order(&|r| r.e_m)), predicted.rate)?;
    Ok(())
}

/// Writes `rates.csv` and the same table as text to `rates.txt`.
fn rates(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    let r = &cfg.rates;
    let schemes: Vec<_> = r.schemes.iter().map(|&s| s.into()).collect();
    let table = RateTable::build(&schemes, &r.dims, &r.gammas, &r.epsilons)?;
    write_csv(create(&cfg.out, "rates.csv")?, &table.0)?;
    let text = table.to_string();
    let mut w = create(&cfg.out, "rates.txt")?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    log.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes `eoc_levels.csv` and `eoc_orders.csv` for the manufactured solution.
fn eoc(cfg: &RunConfig, log: &mut dyn Write) -> Outcome {
    let problem =
        EocProblem { scheme: cfg.scheme, epsilon: cfg.epsilon, solver: cfg.solver, t_end: cfg.t_end, solution: manufactured(cfg) };
    let table = eoc_study(&problem, &cfg.eoc.levels, cfg.dt_rule, cfg.eoc_reference())?;
    write_csv(create(&cfg.out, "eoc_levels.csv")?, &table.levels)?;
    write_csv(create(&cfg.out, "eoc_orders.csv")?, &order_rows(&table))?;
    writeln!(log, "{:>6}{:>12}{:>14}{:>14}{:>10}{:>10}", "N", "dt", "rel. energy", "velocity", "max rho", "max |u|")?;
    for l in &table.levels {
        writeln!(
            log,
            "{:>6}{:>12.4e}{:>14.4e}{:>14.4e}{:>10.4}{:>10.4}",
            l.n, l.dt, l.relative_energy, l.velocity, l.max_rho, l.max_speed
        )?;
    }
    for (m, o) in &table.orders {
        writeln!(log, "order {m} {}", o.map_or("undefined".to_string(), |o| format!("{o:.4}")))?;
    }
    Ok(())
}
