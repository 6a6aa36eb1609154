use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_su3-bench")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn flags_round_trip_into_metadata() {
    let out = bench(&[
        "-L", "3", "-I", "2", "-W", "0", "-T", "2", "--variant", "v3", "--transpose-b", "--precision", "f64",
        "--placement", "sequential", "--pin", "compact", "--mix", "blocked", "--per-iteration", "--format", "json",
    ]);
    let v = json(&out);
    let r = &v[0];
    let cfg = &r["config"];
    assert_eq!(cfg["L"], 3);
    assert_eq!(cfg["iterations"], 2);
    assert_eq!(cfg["warmups"], 0);
    assert_eq!(cfg["workers"], 2);
    assert_eq!(cfg["variant"], "collapse-all");
    assert_eq!(cfg["transpose_b"], true);
    assert_eq!(cfg["precision"], "f64");
    assert_eq!(cfg["placement"], "sequential");
    assert_eq!(cfg["pin"], "compact");
    assert_eq!(cfg["mix"], "blocked");
    assert_eq!(cfg["format"], "json");
    assert_eq!(cfg["per_iteration"], true);
    assert_eq!(r["verified"], true);
    assert_eq!(r["variant"], "collapse-all+bt");
    assert_eq!(r["flops_per_iteration"], 864 * 81);
    assert!(r["iteration_stats"].is_object());
}

#[test]
fn csv_schema() {
    let out = bench(&["-L", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("variant,L,precision,workers,iterations,warmups,seconds,gflops,gbytes_per_s,verified"));
    assert!(lines.next().unwrap().starts_with("site-parallel,2,f32,1,1,1,"));
}

#[test]
fn model_report_with_machine() {
    let v = json(&bench(&["-L", "2", "--precision", "f64", "--machine", "piuma-core", "--format", "json"]));
    assert_eq!(v["bounds"]["limiter"], "issue");
    assert!((v["bounds"]["bandwidth"].as_f64().unwrap() - 4.32).abs() < 1e-12);
    assert!(v["efficiency_pct"].as_f64().unwrap() > 0.0);
}

#[test]
fn machine_file_is_loaded() {
    let dir = std::env::temp_dir().join(format!("su3-bench-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "name = \"tiny\"\nclock_ghz = 1.0\nsimd_units = 1\nsimd_lanes = 1\nfma = false\n\
         cores_per_socket = 1\nsockets = 1\nbandwidth_per_socket_gbs = 1.0\n\
         pipelines_per_core = 1\npipeline_clock_ghz = 1.0\n",
    )
    .unwrap();
    let out = bench(&["--table1", "--machine", path.to_str().unwrap(), "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["lanes"], serde_json::json!([1]));
    assert_eq!(v["rows"][2]["core"][0], 1.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn simulate_route() {
    let v = json(&bench(&["--simulate", "--mix", "blocked", "--sim-repeat", "200", "--format", "json"]));
    assert!((v["gflops_per_core"].as_f64().unwrap() - 4.8).abs() < 0.05);
    let text = String::from_utf8(bench(&["--simulate", "--sim-threads", "1"]).stdout).unwrap();
    assert!(text.contains("flops/cycle"));
}

#[test]
fn sweep_reports_speedup() {
    let out = bench(&["-L", "2", "--sweep", "1,2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",speedup"));
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().ends_with(",1"));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["--variant", "v9"][..],
        &["--precision", "f16"],
        &["--placement", "random"],
        &["--format", "xml"],
        &["-L", "0"],
        &["-I", "0"],
        &["-T", "0"],
        &["--sweep", "4,2"],
        &["--machine", "/definitely/not/here.toml"],
        &["--simulate", "--sim-threads", "0"],
    ] {
        let out = bench(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn oversized_lattice_exits_3() {
    let out = bench(&["-L", "4000"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_0() {
    assert_eq!(bench(&["--help"]).status.code(), Some(0));
}
