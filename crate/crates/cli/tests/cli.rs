use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rm-lab");

const CONFIG: &str = r#"
[problem]
preset = "poisson1d_sin"
c1 = 1.0

[model]
hidden = [6]

[loss]
form = "discrete_rm"
tau = 10.0

[loss.samples]
m_r = 32

[optim]
step_size = 1e-2
max_iter = 25
"#;

fn rm_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("RM_LAB_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, format!("{CONFIG}\n{extra}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("summary.csv")).unwrap()
}

#[test]
fn single_run_gives_one_row_and_one_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = rm_lab(&["run", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s.lines().next().unwrap(), golden("summary_header.csv").trim_end());
    assert_eq!(s.lines().count(), 2);
    let runs: Vec<_> = fs::read_dir(tmp.path().join("o/runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/MANIFEST.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"], 1);
    assert!(manifest["tool"].as_str().unwrap().starts_with("rm-lab "));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), s);
}

#[test]
fn sweep_rows_follow_key_order_and_rerun_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[sweep]\nn = [4, 6]\nseeds = [1, 2, 3]\n[output]\ndir = \"from-config\"\nformats = [\"csv\", \"json\", \"trajectory\"]\n",
    );
    assert_eq!(rm_lab(&["run", &cfg], tmp.path()).status.code(), Some(0));
    assert_eq!(rm_lab(&["run", &cfg, "--out", "b", "--jobs", "3"], tmp.path()).status.code(), Some(0));
    let a = summary(&tmp.path().join("from-config"));
    let b = summary(&tmp.path().join("b"));
    assert_eq!(a, b);
    let rows: Vec<Vec<&str>> = a.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r[0], r[2], r[8])).collect();
    assert_eq!(
        keys,
        [
            ("run-0000", "4", "1"),
            ("run-0001", "4", "2"),
            ("run-0002", "4", "3"),
            ("run-0003", "6", "1"),
            ("run-0004", "6", "2"),
            ("run-0005", "6", "3"),
        ]
    );
    assert!(rows.iter().all(|r| r[1] == "ok"));
    assert!(tmp.path().join("b/runs/run-0005.trajectory.csv").exists());
    assert_eq!(
        fs::read(tmp.path().join("from-config/MANIFEST.json")).unwrap(),
        fs::read(tmp.path().join("b/MANIFEST.json")).unwrap()
    );
}

#[test]
fn seed_variable_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sweep]\nseeds = [1, 2]\n");
    let out = Command::new(BIN)
        .args(["run", &cfg, "--out", "o"])
        .current_dir(tmp.path())
        .env("RM_LAB_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s.lines().count(), 2);
    assert_eq!(s.lines().nth(1).unwrap().split(',').nth(8), Some("77"));
    let bad = Command::new(BIN)
        .args(["run", &cfg, "--out", "o"])
        .current_dir(tmp.path())
        .env("RM_LAB_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sweep]\nwidth = [4]\n");
    let out = rm_lab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("width") && err.contains("line"), "{err}");
    assert_eq!(rm_lab(&["run", "missing.toml"], tmp.path()).status.code(), Some(2));
    assert_eq!(rm_lab(&["probe-constants", "--preset", "nope"], tmp.path()).status.code(), Some(2));
    assert_eq!(rm_lab(&["rademacher", "--preset", "poisson1d_sin", "--m-grid", "9..3"], tmp.path()).status.code(), Some(2));
}

#[test]
fn run_failures_exit_3_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "").replace("config.toml", "bad.toml");
    fs::write(&cfg, CONFIG.replace("step_size = 1e-2", "algorithm = \"gd\"\nstep_size = 1e8")).unwrap();
    let out = rm_lab(&["run", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let s = summary(&tmp.path().join("o"));
    assert!(s.lines().nth(1).unwrap().starts_with("run-0000,failed,"));
}

#[test]
fn counterexample_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rm_lab(&["counterexample", "--mr", "4,16,64"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), golden("counterexample_header.csv").trim_end());
    let ms: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ms, ["4", "16", "64"]);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!(v[0] <= 1e-12 && (v[1] - 0.5).abs() <= 1e-6 && v[2] >= 0.5 - 1e-6);
    }
    assert_eq!(rm_lab(&["counterexample", "--mr", "1"], tmp.path()).status.code(), Some(2));
}

#[test]
fn rademacher_and_probe_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["rademacher", "--preset", "poisson1d_sin", "--m-grid", "16..64", "--trials", "4", "--networks", "5"];
    let out = rm_lab(&args, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let ms: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ms, ["16", "32", "64"]);
    assert_eq!(rm_lab(&args, tmp.path()).stdout, text.as_bytes());
    let out = rm_lab(&["probe-constants", "--preset", "advreac1d_friedrichs"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# c1_hat="));
}
