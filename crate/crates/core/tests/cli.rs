use std::path::Path;
use std::process::Command;

fn pfp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pfp")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const SMALL: &str = r#"
seed = 5
[world]
districts = 3
schools = 12
potential_applicants = 40
advertised_counts = { p4p = 4, fw = 3, mixed = 2 }
experienced_counts = { p4p = 6, fw = 6 }
"#;

fn config(dir: &Path, extra: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_validate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let (code, stdout, stderr) = pfp(&["run", "--config", &cfg, "--out", out, "--stages", "simulate,score-bn,award"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 3);
    let (code, stdout, _) = pfp(&["validate", "--config", &cfg, "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("match their manifests"));
}

#[test]
fn bad_config_and_bad_panel_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[metric]\nbinz = 3\n");
    let (code, _, stderr) = pfp(&["validate", "--config", &cfg]);
    assert_eq!(code, 2, "{stderr}");
    let (code, _, _) = pfp(&["run", "--stages", "simulate,teleport"]);
    assert_eq!(code, 2);

    let cfg = config(dir.path(), "");
    let text = format!("input = {:?}\n{}", dir.path().join("nowhere"), std::fs::read_to_string(&cfg).unwrap());
    std::fs::write(&cfg, text).unwrap();
    let (code, _, stderr) = pfp(&["validate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("assignments.csv"));
}

#[test]
fn numerical_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // IRT scoring that cannot converge in one EM step
    let cfg = config(dir.path(), "[irt]\nmax_iter = 1\n");
    let cfg_text = std::fs::read_to_string(&cfg).unwrap().replace("[world]", "[world]\nscore_mode = \"irt\"\nitems_per_test = 6");
    std::fs::write(&cfg, cfg_text).unwrap();
    let out = dir.path().join("out");
    let (code, _, stderr) = pfp(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--stages", "simulate,score-irt"]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("score-irt"));
}
