mod support;

use support::{run, run_json, FIT_GENET, FIT_LASSO};

const DATA: &str = "gpsselect fit --data crates/core/data/diabetes.csv";

#[test]
fn oversized_increment_is_a_numerical_error() {
    let o = run(DATA, &["--steps", "10", "--delta-t", "1e9"], &[]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    assert!(o.stderr.contains("largest initial gradient"));
}

#[test]
fn input_problems_exit_with_one() {
    assert_eq!(run("gpsselect fit --data missing.csv", &[], &[]).code, 1);
    assert_eq!(run(DATA, &["--response", "nothere"], &[]).code, 1);
    assert_eq!(run(DATA, &["--penalty", "ridge"], &[]).code, 1);
    assert_eq!(run(DATA, &["--criterion", "xyz"], &[]).code, 1);
    assert_eq!(run(DATA, &["--tau2", "-3"], &[]).code, 1);
    assert_eq!(run(DATA, &["--unknown-flag"], &[]).code, 1);
    assert_eq!(run(DATA, &[], &[("GPSSELECT_THREADS", "zero")]).code, 1);
    assert_eq!(run("gpsselect simulate --example 7", &[], &[]).code, 1);
}

#[test]
fn help_exits_cleanly() {
    let o = run("gpsselect --help", &[], &[]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("simulate"));
}

#[test]
fn fit_document_layout() {
    let doc = run_json(FIT_LASSO);
    assert_eq!(doc["manifest"]["tool"], "gpsselect");
    assert_eq!(doc["manifest"]["schema_version"], 1);
    assert_eq!(doc["manifest"]["invocation"]["command"], "fit");
    assert_eq!(doc["manifest"]["input"]["sha256"].as_str().unwrap().len(), 64);
    assert!(doc["manifest"]["resolved"]["delta_t"].as_f64().unwrap() > 0.0);
    let steps = doc["steps"].as_array().unwrap();
    assert_eq!(steps[0]["l1"], 0.0);
    assert_eq!(steps[0]["df"], 0.0);
    let selected = doc["selections"][0]["step"].as_u64().unwrap();
    assert!(steps.iter().any(|s| s["step"].as_u64() == Some(selected)));
    assert_eq!(doc["criteria"].as_array().unwrap().len(), steps.len());
    // Numbers survive a serialize/parse round trip unchanged.
    let text = serde_json::to_string(&doc).unwrap();
    let again: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(again, doc);
}

#[test]
fn criterion_all_and_both_trackers() {
    let o = run(DATA, &["--criterion", "all", "--df", "both", "--thin", "200"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    let names: Vec<&str> = doc["selections"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["criterion"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["cp", "aic", "aicc", "bic", "gcv", "cv"]);
    assert!(doc["summary"]["df_tracker_max_abs_diff"].as_f64().unwrap() < 1e-8);
    assert_eq!(doc["cross_validation"]["grid"].as_array().unwrap().len(), 101);
    let cp = &doc["selections"][0];
    let aic = &doc["selections"][1];
    assert_eq!(cp["step"], aic["step"]);
}

#[test]
fn genet_zero_pattern() {
    let doc = run_json(FIT_GENET);
    let coefs = &doc["selections"][0]["coefficients"];
    for name in ["age", "tc", "tch", "glu"] {
        assert_eq!(coefs[name], 0.0, "{name}");
    }
}

#[test]
fn plot_data_and_trace() {
    let dir = std::env::temp_dir().join(format!("gpsselect-plot-{}", std::process::id()));
    let o = run(
        DATA,
        &["--penalty", "enet", "--trace-var", "sex", "--plot-data", dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let doc: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(doc["trace"]["variable"], 2);
    for file in ["df.txt", "path_bmi.txt", "gradient_sex.txt"] {
        let body = std::fs::read_to_string(dir.join(file)).unwrap();
        let rows: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).collect();
        assert!(rows.len() > 10);
        assert!(rows.iter().all(|r| r.split(' ').count() == 2));
    }
    let _ = std::fs::remove_dir_all(&dir);
    assert_eq!(run(DATA, &["--trace-var", "11"], &[]).code, 1);
}

#[test]
fn csv_output_carries_the_manifest() {
    let o = run(DATA, &["--format", "csv", "--criterion", "cp,gcv"], &[]);
    assert_eq!(o.code, 0);
    let mut lines = o.stdout.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: {"));
    assert!(lines.next().unwrap().starts_with("criterion,step,t,l1,df,intercept,age"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let cmd = "gpsselect simulate --example 3 --reps 6 --seed 2 --criterion cv,bic";
    let a = run(cmd, &[], &[("GPSSELECT_THREADS", "1")]);
    let b = run(cmd, &[], &[("GPSSELECT_THREADS", "4")]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn replay_rejects_changed_input() {
    let dir = std::env::temp_dir().join(format!("gpsselect-digest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("d.csv");
    std::fs::write(&data, "a,b,y\n1,2,3\n2,1,4\n3,5,2\n4,3,8\n5,8,1\n").unwrap();
    let out = dir.join("run.json");
    let fit = format!("gpsselect fit --data {} --criterion gcv", data.display());
    assert_eq!(run(&fit, &["--out", out.to_str().unwrap()], &[]).code, 0);
    let replay = format!("gpsselect replay --manifest {}", out.display());
    assert_eq!(run(&replay, &[], &[]).code, 0);
    std::fs::write(&data, "a,b,y\n1,2,3\n2,1,4\n3,5,2\n4,3,8\n5,8,2\n").unwrap();
    let o = run(&replay, &[], &[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("changed"));
    let _ = std::fs::remove_dir_all(&dir);
}
