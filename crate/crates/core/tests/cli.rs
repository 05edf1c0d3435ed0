use std::path::Path;
use std::process::Command;

fn cpulse(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cpulse"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn catalog_prints_u3() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = cpulse(&["catalog", "U3"], dir.path());
    assert_eq!(code, 0);
    assert!(out.contains("(0, 1/2, 0)"), "{out}");
}

#[test]
fn simulate_resonant_u5a() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = cpulse(
        &["simulate", "--seq", "U5a", "--shape", "rect", "--area", "1.0pi", "--detuning", "0"],
        dir.path(),
    );
    assert_eq!(code, 0);
    let q: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("Q = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(q < 1e-10, "{q}");
}

#[test]
fn solve_five_matches_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = cpulse(&["solve", "--n", "5", "--seeds", "64"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("\"U5a\"") && out.contains("\"U5b\""), "{out}");
}

#[test]
fn unknown_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cpulse(&["map", "--nope"], dir.path());
    assert_eq!(code, 1);
    assert!(!err.is_empty());
    assert_eq!(cpulse(&["catalog", "U6"], dir.path()).0, 1);
}

#[test]
fn map_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["map", "--seq", "U5b", "--res", "9x7", "--jitter", "0.01", "--seed", "3", "--out"];
    let a = [&args[..], &["a.csv"]].concat();
    let b = [&args[..], &["b.csv"]].concat();
    assert_eq!(cpulse(&a, dir.path()).0, 0);
    assert_eq!(cpulse(&b, dir.path()).0, 0);
    let ta = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let tb = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(ta.replace("a.csv", "b.csv"), tb);
    assert!(ta.starts_with("# sequence=U5b"));
    assert_eq!(ta.lines().filter(|l| !l.starts_with('#')).count(), 8);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1d.cfg");
    let cfg = cfg.to_str().unwrap();
    let (code, _, err) = cpulse(&["--config", cfg, "--res", "5", "--out", "small.csv"], dir.path());
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    assert!(text.contains("\"quantity\":\"fidelity\""));
    assert!(text.contains("\"resolution\":[5,5]"));
    // resonant point of a full pulse at T = τ
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!((rows[2][2] - 1.0).abs() < 1e-10);
}

#[test]
fn every_shipped_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig1a", "fig1b", "fig1c", "fig1d", "fig2"] {
        let cfg = configs().join(format!("{name}.cfg"));
        let (code, _, err) = cpulse(
            &["--config", cfg.to_str().unwrap(), "--res", "3", "--format", "json"],
            dir.path(),
        );
        assert_eq!(code, 0, "{name}: {err}");
    }
    assert!(dir.path().join("fig2_U25b.csv").exists());
}

#[test]
fn echo_writes_efficiency_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = cpulse(
        &["echo", "--seq", "U5b", "--res", "3", "--members", "20", "--format", "json"],
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["metadata"]["inversion_count"], 2);
    assert_eq!(v["metadata"]["command"], "echo");
}
