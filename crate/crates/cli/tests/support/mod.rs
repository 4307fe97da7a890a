//! Commands documented in the README and helpers to run them against the
//! built binary. The docs lint checks that every command listed here
//! appears verbatim in the README.

#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

pub const FIT_LASSO: &str =
    "gpsselect fit --data crates/core/data/diabetes.csv --response y --penalty lasso --criterion cp";
pub const FIT_ENET: &str =
    "gpsselect fit --data crates/core/data/diabetes.csv --response y --penalty enet --alpha 0.5 --criterion cp";
pub const FIT_GENET: &str =
    "gpsselect fit --data crates/core/data/diabetes.csv --response y --penalty genet --alpha 0.5 --criterion cp";
pub const SIM_DF_EX1: &str =
    "gpsselect simulate --example 1 --reps 200 --seed 1 --compare-df --tau2 true";
pub const SIM_DF_EX3: &str =
    "gpsselect simulate --example 3 --reps 200 --seed 1 --compare-df --tau2 true";
pub const SIM_EX3_BIC: &str =
    "gpsselect simulate --example 3 --reps 200 --seed 1 --penalty lasso --criterion bic";
pub const SIM_EX3_GENET_CV: &str =
    "gpsselect simulate --example 3 --reps 200 --seed 1 --penalty genet --alpha 0.5 --criterion cv";
pub const SIM_EX2_ENET_CP: &str =
    "gpsselect simulate --example 2 --reps 200 --seed 1 --penalty enet --alpha 0.5 --criterion cp";
pub const BENCH: &str = "gpsselect bench --n 100,200,500 --reps 3";
pub const VERIFY: &str = "gpsselect verify --data crates/core/data/diabetes.csv --response y";

pub const DOCUMENTED: &[&str] = &[
    FIT_LASSO,
    FIT_ENET,
    FIT_GENET,
    SIM_DF_EX1,
    SIM_DF_EX3,
    SIM_EX3_BIC,
    SIM_EX3_GENET_CV,
    SIM_EX2_ENET_CP,
    BENCH,
    VERIFY,
];

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs a documented command line (`gpsselect ...`) from the workspace root,
/// with extra arguments appended.
pub fn run(line: &str, extra: &[&str], env: &[(&str, &str)]) -> Outcome {
    let mut words = line.split_whitespace();
    assert_eq!(words.next(), Some("gpsselect"), "not a gpsselect command: {line}");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gpsselect"));
    cmd.current_dir(workspace_root()).args(words).args(extra);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn run_json(line: &str) -> serde_json::Value {
    let o = run(line, &[], &[]);
    assert_eq!(o.code, 0, "{line} failed: {}", o.stderr);
    serde_json::from_str(&o.stdout).expect("JSON output")
}
