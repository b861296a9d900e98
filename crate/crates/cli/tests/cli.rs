use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aaip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aaip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = aaip(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_then_fit_tabular() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--seed", "5", "--out", "g", "generate", "--scenarios", "3", "--agents", "2", "--per-scenario", "3"]);
    for f in ["dataset.jsonl", "manifest.json", "config.json", "scenarios/gen000.json"] {
        assert!(d.join("g").join(f).exists(), "{f}");
    }
    let m = json(d.join("g/manifest.json"));
    assert_eq!(m["trajectories"], 18);
    assert_eq!(m["agents"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_to_string(d.join("g/dataset.jsonl")).unwrap().lines().count(), 18);
    assert_eq!(json(d.join("g/config.json"))["command"]["subcommand"], "generate");

    ok(d, &["--seed", "5", "--out", "f", "fit", "--dataset", "g", "--agent", "1"]);
    let r = json(d.join("f/fit_result.json"));
    assert_eq!(r["agent"], 1);
    assert_eq!(r["lambda_star"].as_array().unwrap().len(), 3);
    assert!(r["nll"].as_f64().unwrap().is_finite());
    let trace = fs::read_to_string(d.join("f/trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,nll,lambda_Ice,lambda_Cone,lambda_Parked\n"));
}

#[test]
fn same_seed_same_bytes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    for out in ["a", "b"] {
        ok(d, &["--seed", "9", "--out", out, "generate", "--scenario", "fig1", "--agents", "2", "--per-scenario", "4"]);
        ok(d, &["--seed", "9", "--out", &format!("{out}fit"), "fit", "--dataset", out]);
    }
    assert_eq!(fs::read(d.join("a/dataset.jsonl")).unwrap(), fs::read(d.join("b/dataset.jsonl")).unwrap());
    let (x, y) = (json(d.join("afit/fit_result.json")), json(d.join("bfit/fit_result.json")));
    for k in 0..3 {
        let (p, q) = (x["lambda_star"][k].as_f64().unwrap(), y["lambda_star"][k].as_f64().unwrap());
        assert!((p - q).abs() <= 1e-9);
    }
    ok(d, &["--seed", "10", "--out", "c", "generate", "--scenario", "fig1", "--agents", "2", "--per-scenario", "4"]);
    assert_ne!(fs::read(d.join("a/dataset.jsonl")).unwrap(), fs::read(d.join("c/dataset.jsonl")).unwrap());
}

#[test]
fn bad_inputs_exit_with_validation_code() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let o = aaip(d, &["generate", "--agents", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--agents"));
    assert_eq!(code(&aaip(d, &["fit", "--dataset", "missing"])), 2);
    assert_eq!(code(&aaip(d, &["generate", "--lambda", "1,2"])), 2);
    assert_eq!(code(&aaip(d, &["generate", "--lambda-range", "5,-5"])), 2);
    assert_eq!(code(&aaip(d, &["generate", "--scenario", "no_such_file.json"])), 2);
}

#[test]
fn fitting_an_empty_dataset_fails() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "g", "generate", "--scenario", "fig1", "--per-scenario", "1"]);
    fs::write(d.join("g/dataset.jsonl"), "").unwrap();
    let o = aaip(d, &["--out", "f", "fit", "--dataset", "g"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no trajectories"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.join("f/fit_result.json").exists());
}

#[test]
fn compare_writes_five_models() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let stdout = ok(d, &["--out", "c", "compare", "--trajectories", "30", "--restarts", "2"]);
    assert!(stdout.contains("AAIP"));
    let csv = fs::read_to_string(d.join("c/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().nth(1).unwrap().starts_with("\"Noise\","));
    assert!(d.join("c/comparison.txt").exists());
    // compare on a stored dataset instead of a fresh simulation
    ok(d, &["--out", "c2", "compare", "--dataset", "c", "--restarts", "2"]);
    assert_eq!(fs::read_to_string(d.join("c2/comparison.csv")).unwrap(), csv);
}

#[test]
fn continuous_generate_fit_and_sweep() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "--out", "g", "generate", "--domain", "continuous", "--per-scene", "2", "--mc-samples", "4", "--lambda",
            "0.5,-0.5,1",
        ],
    );
    let m = json(d.join("g/manifest.json"));
    assert_eq!(m["trajectories"], 20);
    assert_eq!(m["continuous"]["mc_samples"], 4);
    ok(d, &["--out", "f", "fit", "--dataset", "g", "--restarts", "2"]);
    let r = json(d.join("f/fit_result.json"));
    assert_eq!(r["config"]["method"], "nelder_mead");
    assert_eq!(r["continuous"]["bandwidth"], 1.0);

    ok(
        d,
        &["--out", "s", "sweep", "--domain", "continuous", "--agents", "3", "--sizes", "10,20", "--mc-samples", "4"],
    );
    let eff = fs::read_to_string(d.join("s/sample_efficiency.csv")).unwrap();
    assert_eq!(eff.lines().next().unwrap(), "minutes_of_data,mean_sq_error,se");
    assert_eq!(eff.lines().count(), 3);
    let rec = fs::read_to_string(d.join("s/recovery.csv")).unwrap();
    assert_eq!(rec.lines().next().unwrap(), "agent,feature,lambda_true,lambda_est");
    assert_eq!(rec.lines().count(), 1 + 3 * 3);
}

#[test]
fn tabular_sweep_and_plot_export() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let stdout = ok(d, &["--out", "s", "sweep", "--agents", "4", "--scenarios", "3", "--per-scenario", "2"]);
    assert!(stdout.contains("Ice"));
    assert_eq!(fs::read_to_string(d.join("s/recovery.csv")).unwrap().lines().count(), 1 + 4 * 3);
    let summary = json(d.join("s/sweep_summary.json"));
    assert!(summary["r_squared"]["Cone"].is_number());

    ok(d, &["--out", "p", "export-plots", "--run", "s"]);
    let scatter = fs::read_to_string(d.join("p/fig2_scatter.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "lambda_true,lambda_est,feature");

    ok(d, &["--out", "g", "generate", "--scenario", "fig1", "--lambda=-100,10,0", "--per-scenario", "2"]);
    ok(d, &["--out", "p2", "export-plots", "--run", "g"]);
    let att = json(d.join("p2/fig1_attention.json"));
    let map = &att[0]["attention"];
    assert!(map["ice0"].as_f64().unwrap() < 0.01);
    assert!(map["parked0"].as_f64().unwrap() > 0.5);
    assert!(fs::read_to_string(d.join("p2/trajectories.csv")).unwrap().starts_with("scenario,agent,trajectory,step,x,y\n"));

    fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(code(&aaip(d, &["--out", "p3", "export-plots", "--run", "empty"])), 2);
}

#[test]
fn validate_scenario_reports_each_file() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--out", "g", "generate", "--scenarios", "2", "--per-scenario", "1"]);
    let stdout = ok(d, &["validate-scenario", "g/scenarios/gen000.json", "g/scenarios/gen001.json"]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("ok ")).count(), 2);

    fs::write(
        d.join("bad.json"),
        r#"{"id":"bad","width":3,"height":3,"ego_start":[7,7],"goal":[1,2]}"#,
    )
    .unwrap();
    let o = aaip(d, &["validate-scenario", "g/scenarios/gen000.json", "bad.json"]);
    assert_eq!(code(&o), 2);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("invalid bad.json") && out.contains("outside the grid"), "{out}");
}
