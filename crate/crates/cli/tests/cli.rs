use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cns_cli::config::Command as Cmd;
use cns_cli::{parse_config_str, Failure};
use cns_core::analysis::eoc::{EocLevel, METRICS};
use cns_core::analysis::rates::{predict_rate, RatePrediction};
use cns_core::identities::IdentityResidual;
use cns_core::io::{read_csv, read_state, OrderRow};
use cns_core::schemes::StepReport;
use cns_core::analysis::consistency::ConsistencyReport;

fn cns(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cns"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config_str("command = \"run\"\n").unwrap();
    assert_eq!(cfg.command, Cmd::Run);
    assert_eq!(cfg.solver.tolerance, 1e-10);
    assert_eq!(cfg.seed, 0);
    assert_eq!((cfg.mesh.dim, cfg.mesh.n), (2, 16));
}

#[test]
fn validation_names_the_key() {
    for (body, key) in [
        ("[physics]\ngamma = 1.0\n", "physics.gamma"),
        ("[scheme]\nepsilon = -1.0\n", "scheme.epsilon"),
        ("[physics]\nmu = 0.0\n", "physics.mu"),
        ("[physics]\nlambda = -0.1\n", "physics.lambda"),
        ("[mesh]\ndim = 4\n", "mesh.dim"),
        ("[data]\nu0 = [1.0]\n", "data.u0"),
    ] {
        let e = parse_config_str(&format!("command = \"run\"\n{body}")).unwrap_err();
        assert!(e.to_string().contains(key), "{e}");
    }
    let e = parse_config_str("command = \"eoc\"\n[eoc]\nlevels = [16, 32]\n").unwrap_err();
    assert!(e.to_string().contains("eoc.levels"), "{e}");
    let e = parse_config_str("command = \"run\"\n[scheme]\nepsilom = 0.0\n").unwrap_err();
    assert!(e.to_string().contains("epsilom"), "{e}");
    assert!(parse_config_str("command = \"plot\"\n").is_err());
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"run\"\n[physics]\ngamma = 1.0\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("physics.gamma"));
    let o = cns(dir.path(), "command = \"rates\"\n", &["--levels", "8,16,32"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cns(dir.path(), "command = \"consistency\"\n", &["--levels", "8,4,16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(Failure::Validation(String::new()).exit_code(), 2);
    assert_eq!(Failure::Solver(String::new()).exit_code(), 3);
    assert_eq!(Failure::Invariant(String::new()).exit_code(), 4);
}

#[test]
fn identities_on_8_squared() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"identities\"\nseed = 0\n[mesh]\nn = 8\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<IdentityResidual> = read_csv(fs::File::open(dir.path().join("out/identities.csv")).unwrap()).unwrap();
    assert!(rows.len() > 10);
    assert!(rows.iter().all(|r| r.passed()));
    let max = rows
        .iter()
        .filter(|r| r.relation == cns_core::identities::Relation::Equal)
        .map(|r| r.relative())
        .fold(0.0, f64::max);
    assert!(max <= 1e-12, "{max}");
}

#[test]
fn rates_match_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"rates\"\n[rates]\ngammas = [1.2, 1.5, 2.0, 2.5, 3.0]\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<RatePrediction> = read_csv(fs::File::open(dir.path().join("out/rates.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 5 * 5);
    for r in &rows {
        assert_eq!(*r, predict_rate(r.scheme, r.dim, r.gamma, r.epsilon).unwrap());
    }
    let text = fs::read_to_string(dir.path().join("out/rates.txt")).unwrap();
    assert_eq!(text, String::from_utf8(o.stdout).unwrap());
}

const RANDOM_RUN: &str = "command = \"run\"\n[mesh]\nn = 8\n[scheme]\nkind = \"mac\"\ndt = 0.02\n\
                          [data]\ninitial = \"random\"\n[run]\ncheckpoint_every = 2\n";

#[test]
fn runs_are_byte_identical_per_seed() {
    let outputs: Vec<_> = [7, 7, 8]
        .iter()
        .map(|seed| {
            let dir = tempfile::tempdir().unwrap();
            let o = cns(dir.path(), RANDOM_RUN, &["--seed", &seed.to_string()]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            let out = dir.path().join("out");
            (fs::read(out.join("steps.csv")).unwrap(), fs::read(out.join("final_state.txt")).unwrap(), o.stdout)
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0].0, outputs[2].0);
}

#[test]
fn run_outputs_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), RANDOM_RUN, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let steps: Vec<StepReport> = read_csv(fs::File::open(out.join("steps.csv")).unwrap()).unwrap();
    assert_eq!(steps.len(), 6);
    assert!(steps.iter().all(|s| s.min_rho > 0.0 && (s.mass - steps[0].mass).abs() <= 1e-9));
    let last = read_state(&mut fs::read(out.join("final_state.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(last.time, steps[5].t);
    assert_eq!(last.mass(), steps[5].mass);
    let mid = read_state(&mut fs::read(out.join("checkpoint_000004.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(mid.min_density(), steps[4].min_rho);
    assert!(!out.join("checkpoint_000003.txt").exists());
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"run\"\n[mesh]\nn = 8\n[solver]\nmax_iterations = 1\n", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // Rows accepted before the failure stay on disk.
    let steps: Vec<StepReport> = read_csv(fs::File::open(dir.path().join("out/steps.csv")).unwrap()).unwrap();
    assert_eq!(steps[0].n, 0);
}

#[test]
fn eoc_ladder_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"eoc\"\n[physics]\ngamma = 2.0\n[scheme]\nkind = \"fv\"\n", &["--levels", "16,32,64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let levels: Vec<EocLevel> = read_csv(fs::File::open(out.join("eoc_levels.csv")).unwrap()).unwrap();
    assert_eq!(levels.iter().map(|l| l.n).collect::<Vec<_>>(), [16, 32, 64]);
    assert!(levels.windows(2).all(|w| w[1].relative_energy < w[0].relative_energy));
    let orders: Vec<OrderRow> = read_csv(fs::File::open(out.join("eoc_orders.csv")).unwrap()).unwrap();
    assert_eq!(orders.iter().map(|o| o.metric.as_str()).collect::<Vec<_>>(), METRICS);
    assert!(orders[0].order.unwrap() > 0.3);
}

#[test]
fn consistency_with_levels_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = cns(dir.path(), "command = \"consistency\"\n[physics]\ngamma = 1.5\n", &["--levels", "4,8,16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<ConsistencyReport> = read_csv(fs::File::open(dir.path().join("out/consistency.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.h).collect::<Vec<_>>(), [0.25, 0.125, 0.0625]);
    assert!(rows.iter().all(|r| r.tau == 1.0 / 32.0));
}
