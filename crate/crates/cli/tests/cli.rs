use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lpembed(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lpembed"));
    cmd.args(args).env_remove("LPEMBED_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("LPEMBED_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn small_sweep_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lpembed(&["phase-transition", "--seed", "3", "--out", out, "--datasets", "4", "--grid-resolution", "[5, 5]"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("phase_transition.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "m,epsilon_n,epsilon_se,delta_n,delta_se");
    assert_eq!(csv.lines().count(), 5);
    let m = manifest(dir.path());
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["datasets"], 4);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert!(m["bound_violations"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("trial.toml");
    fs::write(&cfg, "[experiment]\nkind = \"clinical_trial\"\nn_sims = 50\nsites = 2\nbeta_grid = [0.0, 0.4]\n").unwrap();
    let out = dir.path().join("res");
    let o = lpembed(
        &["clinical-trial", "--seed", "1", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--n-sims", "20"],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["n_sims"], 20);
    assert_eq!(m["config"]["sites"], 2);
    // header plus 2 betas x 5 methods
    assert_eq!(fs::read_to_string(out.join("power_curve.csv")).unwrap().lines().count(), 11);
}

#[test]
fn environment_supplies_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpembed(&["validate", "--seed", "0", "--datasets", "2", "--grid-resolution", "[4, 4]"], Some(dir.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("pointwise_validation.csv").exists());
}

#[test]
fn operational_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let unknown = lpembed(&["cauchy-decay", "--seed", "0", "--out", out, "--grid-pointz", "5"], None);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("grid_pointz"));
    let no_seed = lpembed(&["cauchy-decay", "--out", out], None);
    assert_eq!(no_seed.status.code(), Some(1));
    let wrong_kind = dir.path().join("k.toml");
    fs::write(&wrong_kind, "[experiment]\nkind = \"train_gmm\"\n").unwrap();
    let o = lpembed(&["validate", "--seed", "0", "--out", out, "--config", wrong_kind.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn help_exits_zero() {
    let o = lpembed(&["--help"], None);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("clinical-trial"));
}
