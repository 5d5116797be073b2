use std::process::Command;

fn helmddm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_helmddm"))
}

#[test]
fn run_prints_csv_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    for _ in 0..2 {
        let out = helmddm()
            .args([
                "run", "--grid", "60x60", "--nb", "2x2", "--freq", "5", "--npml", "10", "--format",
                "csv",
            ])
            .arg("--csv")
            .arg(&csv)
            .env_remove("HELMDDM_THREADS")
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.starts_with("size_x,size_y,nbx,nby"));
        assert!(stdout
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("60,60,2,2,10,0,5,30,"));
    }
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "grid = 40x40\nnb = 2x2\nnpml = 8\nfreq = 3\nmode = ddm\n",
    )
    .unwrap();
    let out = helmddm()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--mode", "direct"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("mode direct"), "{stdout}");
}

#[test]
fn thread_count_from_environment() {
    let out = helmddm()
        .args([
            "run", "--grid", "40x40", "--nb", "2x2", "--npml", "8", "--freq", "3",
        ])
        .env("HELMDDM_THREADS", "0")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("thread"));
    let out = helmddm()
        .args([
            "run",
            "--grid",
            "40x40",
            "--nb",
            "2x2",
            "--npml",
            "8",
            "--freq",
            "3",
            "--threads",
            "2",
        ])
        .env("HELMDDM_THREADS", "0")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn invalid_partition_is_rejected() {
    let out = helmddm()
        .args(["run", "--grid", "100x100", "--nb", "3x3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not divide"));
}

#[test]
fn verify_and_mutation() {
    let ok = helmddm()
        .args(["verify", "--dense-lu-systems", "5"])
        .output()
        .unwrap();
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );
    let bad = helmddm()
        .args(["verify", "--dense-lu-systems", "5", "--flip-k2-sign"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL greens-function"));
}
