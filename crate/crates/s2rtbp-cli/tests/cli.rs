use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_s2rtbp"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("s2rtbp-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn prints_a_loadable_default_config() {
    let out = run(&["--print-default-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[certificate]") && text.contains("alpha_mode = \"strict-87.85\""));
    let dir = scratch("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let out_dir = dir.join("out");
    let st = run(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "figures", "fig5"]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out_dir.join("dU_boundary_profile.csv").exists());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "command = \"hill\"\nseed = \"x\"\n").unwrap();
    let out_dir = dir.join("out");
    let st = run(&["--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "hill"]);
    assert_eq!(st.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn out_of_range_energy_exits_2() {
    let out_dir = scratch("energy");
    let st = run(&["--out", out_dir.to_str().unwrap(), "--energy", "5", "hill"]);
    assert_eq!(st.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_figure_is_reported() {
    let out_dir = scratch("unknown");
    let st = run(&["--out", out_dir.to_str().unwrap(), "figures", "fig42"]);
    assert!(!st.status.success());
    let err = String::from_utf8_lossy(&st.stderr);
    assert!(err.contains("fig42") && err.contains("fig10"), "{err}");
    assert!(!out_dir.join("U_boundary_profile.csv").exists());
}

#[test]
fn boundary_profile_csv() {
    let out_dir = scratch("fig2");
    let st = run(&["--out", out_dir.to_str().unwrap(), "figures", "fig2"]);
    assert!(st.status.success());
    let text = std::fs::read_to_string(out_dir.join("U_boundary_profile.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "theta,U");
    assert_eq!(data.len(), 721);
}

#[test]
fn hill_run_writes_report_and_mask() {
    let out_dir = scratch("hill");
    let st = run(&["--out", out_dir.to_str().unwrap(), "--grid", "128", "--energy", "-1.5", "hill"]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(out_dir.join("hill.json").exists());
    let masks = std::fs::read_dir(&out_dir).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().starts_with("hill_mask")
    });
    assert_eq!(masks.count(), 1);
}
