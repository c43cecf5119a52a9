use std::path::Path;
use std::process::{Command, Output};
use utm_heat::config::{Example, Method, RunConfig};

fn utm_heat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_utm-heat")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &RunConfig) -> String {
    let path = dir.join(name);
    std::fs::write(&path, config.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn solve_writes_rows_for_every_point_and_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Example::A.config();
    config.compare_to = None;
    config.output = None;
    let cfg = write_config(dir.path(), "a.json", &config);
    let out = dir.path().join("a.csv");
    let result = utm_heat(&["solve", "--config", &cfg, "--times", "0.01,0.1,1", "--grid", "401", "--output", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "x,t,layer,u,flux"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3 * 401);
    assert!(rows[0].starts_with("0,0.01,0,"));
    assert!(text.contains("# endpoint_caveat: true"));
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Example::D.config();
    config.grid = 51;
    config.output = None;
    let cfg = write_config(dir.path(), "d.json", &config);
    let a = utm_heat(&["solve", "--config", &cfg, "--threads", "1"]);
    let b = utm_heat(&["solve", "--config", &cfg]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(data_rows(&String::from_utf8(a.stdout).unwrap()).len(), 3 * 51);
}

#[test]
fn compare_prints_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Example::A.config();
    config.compare_to = None;
    config.output = None;
    let cfg = write_config(dir.path(), "a.json", &config);
    let result = utm_heat(&["compare", "--config", &cfg, "--oracle", "fourier", "--grid", "101"]);
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    let errors: Vec<f64> = stdout
        .lines()
        .skip_while(|l| !l.starts_with("t,E"))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.iter().all(|e| *e <= 1e-6), "{errors:?}");
}

#[test]
fn example_command_writes_data_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let result = utm_heat(&["example", "B", "--grid", "41", "--times", "0.1", "--output", out.to_str().unwrap()]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(String::from_utf8(result.stdout).unwrap().contains("reference: fd"));
    assert_eq!(data_rows(&std::fs::read_to_string(&out).unwrap()).len(), 41);
    assert!(dir.path().join("b_errors.csv").exists());
}

#[test]
fn cosine_boundary_example_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let result = utm_heat(&["example", "C", "--grid", "41", "--output", out.to_str().unwrap()]);
    assert!(result.status.success());
    assert!(!dir.path().join("c_errors.csv").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"times\": [0.1], ").unwrap();
    assert_eq!(utm_heat(&["solve", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(utm_heat(&["solve", "--config", "/nonexistent/run.json"]).status.code(), Some(1));

    let mut config = Example::B.config();
    config.output = None;
    if let utm_heat::config::ProblemSource::Inline(p) = &mut config.problem {
        p.layers.breakpoints[2] = p.layers.breakpoints[1];
    }
    let invalid = write_config(dir.path(), "invalid.json", &config);
    let result = utm_heat(&["solve", "--config", &invalid]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("invalid problem"));

    let mut config = Example::B.config();
    config.method = Method::Fourier;
    config.output = None;
    let unsupported = write_config(dir.path(), "fourier.json", &config);
    assert_eq!(utm_heat(&["solve", "--config", &unsupported]).status.code(), Some(2));

    assert_eq!(utm_heat(&["example", "Q"]).status.code(), Some(2));
}

#[test]
fn singular_contour_node_exits_with_numerical_failure() {
    // Insulated ends make the system singular at nu = 0; a tiny radius puts
    // every node next to it.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("r.json");
    let text = r#"{
        "problem": {
            "layers": { "breakpoints": [0, 0.5, 1], "sigmas": [1, 1] },
            "interfaces": { "kind": "perfect" },
            "boundary": {
                "beta": [0, 1, 0, 1],
                "left": { "kind": "constant", "value": 0 },
                "right": { "kind": "constant", "value": 0 }
            },
            "initial": [{ "kind": "constant", "value": 1 }, { "kind": "constant", "value": 1 }]
        },
        "times": [0.1],
        "grid": 5,
        "contour": { "radius": 1e-9 }
    }"#;
    std::fs::write(&cfg, text).unwrap();
    let result = utm_heat(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("singular system"));
    std::fs::write(&cfg, text.replace("1e-9", "1")).unwrap();
    assert!(utm_heat(&["solve", "--config", cfg.to_str().unwrap()]).status.success());
}
