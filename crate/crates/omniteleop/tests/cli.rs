use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_omniteleop"));
    c.env_remove("OMNITELEOP_LOG_DIR").env_remove("OMNITELEOP_BIND");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn validate_accepts_every_shipped_scenario() {
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = run(bin().arg("validate").arg("--config").arg(&path));
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        }
    }
}

#[test]
fn missing_v_max_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[sim]\ndt = 0.001\nduration = 1.0\nseed = 0\n\n[policy]\nomega_max = 0.26\n",
    )
    .unwrap();
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x.jsonl")));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("v_max"), "{}", stderr(&o));
    assert!(!dir.path().join("x.jsonl").exists());
}

#[test]
fn unknown_key_and_bad_dt_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, needle) in [
        (
            "typo.toml",
            "[sim]\ndt = 0.001\nduration = 1.0\nseed = 0\nsede = 3\n",
            "sede",
        ),
        ("dt.toml", "[sim]\ndt = -0.001\nduration = 1.0\nseed = 0\n", "dt"),
    ] {
        let cfg = dir.path().join(name);
        fs::write(&cfg, text).unwrap();
        let o = run(bin().arg("validate").arg("--config").arg(&cfg));
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
}

#[test]
fn missing_config_file_exits_one() {
    let o = run(bin().arg("validate").arg("--config").arg("/nonexistent/s.toml"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ten_second_run_at_full_rate_logs_ten_thousand_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ff.jsonl");
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(scenarios().join("free_flight.toml"))
        .args(["--duration", "10", "--decimation", "1"])
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(lines(&out), 1 + 10_000);
    assert!(dir.path().join("ff.summary.json").exists());
}

#[test]
fn log_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .env("OMNITELEOP_LOG_DIR", dir.path())
        .arg("run")
        .arg("--config")
        .arg(scenarios().join("free_flight.toml"))
        .args(["--duration", "0.5"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let logs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".jsonl"))
        .collect();
    assert_eq!(logs, vec!["free_flight.jsonl".to_string()]);
}

#[test]
fn equal_seeds_give_identical_log_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        let o = run(bin()
            .arg("run")
            .arg("--config")
            .arg(scenarios().join("push_slide.toml"))
            .args(["--seed", "9"])
            .arg("--out")
            .arg(&out));
        assert!(o.status.success(), "{}", stderr(&o));
        bytes.push(fs::read(&out).unwrap());
    }
    assert!(bytes[0] == bytes[1]);
}

#[test]
fn trace_flag_overrides_the_operator() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("push.csv");
    fs::write(&trace, "t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z\n0,5,0,0,0,0,0\n").unwrap();
    let out = dir.path().join("t.jsonl");
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(scenarios().join("live.toml"))
        .arg("--trace")
        .arg(&trace)
        .args(["--duration", "2"])
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.summary.json")).unwrap()).unwrap();
    assert!(summary["final_pose"]["position"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("push.csv");
    fs::write(&trace, "t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z\n0,20,0,0,0,0,0\n").unwrap();
    let cfg = dir.path().join("stiff.toml");
    fs::write(
        &cfg,
        "[sim]\ndt = 0.001\nduration = 2.0\nseed = 0\n\n[vehicle]\ninertia = [1e-300, 1e-300, 1e-300, 1e-300, 1e-300, 1e-300]\nstiffness = [100, 100, 100, 5, 5, 5]\ntool_offset = [0.6, 0, 0]\n\n[operator]\ntrace = \"push.csv\"\n",
    )
    .unwrap();
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("d.jsonl")));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn plot_writes_columns_for_a_push_slide_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ps.jsonl");
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(scenarios().join("push_slide.toml"))
        .args(["--decimation", "50"])
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let plot = dir.path().join("ps.dat");
    let o = run(bin().arg("plot").arg("--log").arg(&out).arg("--out").arg(&plot));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&plot).unwrap();
    let mut rows = text.lines();
    let header: Vec<_> = rows.next().unwrap().split_whitespace().collect();
    assert_eq!(header[0], "t");
    assert_eq!(rows.clone().count(), lines(&out) - 1);
    for row in rows {
        assert_eq!(row.split_whitespace().count(), header.len());
    }
}

#[test]
fn plot_of_a_header_only_log_is_a_header_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    fs::write(
        &log,
        r#"{"type":"header","format":"omniteleop-log/1","scenario":"e","kind":"decoupling","dt":0.001,"duration":0.0,"seed":0,"decimation":10}"#,
    )
    .unwrap();
    let plot = dir.path().join("e.dat");
    let o = run(bin().arg("plot").arg("--log").arg(&log).arg("--out").arg(&plot));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&plot).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(text.split_whitespace().count(), 19);
}

#[test]
fn unknown_plot_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    fs::write(
        &log,
        r#"{"type":"header","format":"omniteleop-log/1","scenario":"e","kind":"decoupling","dt":0.001,"duration":0.0,"seed":0,"decimation":10}"#,
    )
    .unwrap();
    let o = run(bin()
        .arg("plot")
        .arg("--log")
        .arg(&log)
        .arg("--out")
        .arg(dir.path().join("e.dat"))
        .args(["--kind", "bode"]));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replay_of_an_input_log_writes_a_session_log() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("inputs.jsonl");
    fs::write(
        &inputs,
        concat!(
            r#"{"type":"header","format":"omniteleop-inputs/1","scenario":"live","dt":0.001,"seed":1}"#,
            "\n",
            r#"{"type":"input","tick":5,"event":{"mode":"pose","t":5.0,"v":[0.1,0,0,0,0,0]}}"#,
            "\n",
            r#"{"type":"end","ticks":100}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = dir.path().join("replay.jsonl");
    let o = run(bin()
        .arg("replay")
        .arg("--config")
        .arg(scenarios().join("live.toml"))
        .arg("--inputs")
        .arg(&inputs)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(lines(&out), 1 + 10);
}

#[test]
fn serve_binds_the_address_from_the_environment() {
    let o = run(bin()
        .env("OMNITELEOP_BIND", "127.0.0.1:0")
        .arg("serve")
        .arg("--config")
        .arg(scenarios().join("live.toml"))
        .args(["--duration", "0.3"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("serving ws://127.0.0.1:"), "{out}");
    assert!(!out.contains(":8765"), "{out}");
}

#[test]
fn serve_on_a_bad_address_exits_one() {
    let o = run(bin()
        .arg("serve")
        .arg("--config")
        .arg(scenarios().join("live.toml"))
        .args(["--bind", "not-an-address", "--duration", "0.1"]));
    assert_eq!(o.status.code(), Some(1));
}
