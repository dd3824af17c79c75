use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn crtlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crtlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CRTLAB_OUT")
        .output()
        .expect("binary runs")
}

const TINY: &str = "\
seed = 11

[bismut]
h = 1/32
replicates = 300
a = 1/2
band_inner = 1/4
band_outer = 1/2
ks_tolerance = 0.3
";

#[test]
fn same_seed_gives_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    for out in ["a", "b"] {
        let o = crtlab(
            &["bismut", "--config", "tiny.cfg", "--out", out],
            dir.path(),
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stdout)
        );
    }
    let a = fs::read(dir.path().join("a/bismut.json")).unwrap();
    let b = fs::read(dir.path().join("b/bismut.json")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("a/bismut_records.csv").exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let one = crtlab(
        &["bismut", "--config", "tiny.cfg", "--threads", "1", "--json"],
        dir.path(),
    );
    let two = crtlab(
        &["bismut", "--config", "tiny.cfg", "--threads", "3", "--json"],
        dir.path(),
    );
    assert_eq!(one.stdout, two.stdout);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let o = crtlab(
        &["bismut", "--config", "tiny.cfg", "--seed", "5", "--json"],
        dir.path(),
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"seed\": 5"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = crtlab(&["laws", "--replicates", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));

    fs::write(dir.path().join("bad.cfg"), "[bismut]\nmystery = 1\n").unwrap();
    let o = crtlab(&["bismut", "--config", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mystery"));

    let o = crtlab(&["laws", "--h", "0.3"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = crtlab(&["laws", "--config", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let strict = TINY.replace("ks_tolerance = 0.3", "ks_tolerance = 0.000001");
    fs::write(dir.path().join("strict.cfg"), strict).unwrap();
    let o = crtlab(&["bismut", "--config", "strict.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL bismut.ring_law"));
}

#[test]
fn report_merges_and_gates() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    crtlab(
        &["bismut", "--config", "tiny.cfg", "--out", "a"],
        dir.path(),
    );
    crtlab(
        &[
            "bismut", "--config", "tiny.cfg", "--seed", "12", "--out", "b",
        ],
        dir.path(),
    );
    let o = crtlab(
        &[
            "report",
            "a/bismut.json",
            "b/bismut.json",
            "--out",
            "m",
            "--name",
            "all",
        ],
        dir.path(),
    );
    let merged = fs::read_to_string(dir.path().join("m/all.json")).unwrap();
    let a = fs::read_to_string(dir.path().join("a/bismut.json")).unwrap();
    let count = |s: &str| s.matches("\"id\":").count();
    assert_eq!(count(&merged), 2 * count(&a));
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));

    fs::write(dir.path().join("junk.json"), "{").unwrap();
    let o = crtlab(&["report", "junk.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.cfg"), TINY).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_crtlab"))
        .args(["bismut", "--config", "tiny.cfg"])
        .current_dir(dir.path())
        .env("CRTLAB_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from_env/bismut.json").exists());
}

#[test]
fn sample_and_balls_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (file, format) in [("e.csv", "csv"), ("e.bin", "binary")] {
        let o = crtlab(
            &[
                "sample", "--a", "1/4", "--h", "1/32", "--seed", "3", "--format", format, file,
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
    }
    let from_csv = crtlab(&["balls", "e.csv", "--a", "1/4", "--r", "1/8"], dir.path());
    let from_bin = crtlab(&["balls", "e.bin", "--a", "1/4", "--r", "1/8"], dir.path());
    assert_eq!(from_csv.status.code(), Some(0));
    assert_eq!(from_csv.stdout, from_bin.stdout);
    let text = String::from_utf8(from_csv.stdout).unwrap();
    assert!(text.starts_with("a,r,ball,start,end,mass,diameter\n"));

    fs::write(dir.path().join("bad.csv"), "step,0.5\n0\n3\n0\n").unwrap();
    let o = crtlab(&["balls", "bad.csv", "--a", "0.5", "--r", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
