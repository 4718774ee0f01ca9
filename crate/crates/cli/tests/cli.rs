use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pinarray(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinarray"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = pinarray(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn data_rows(text: &str) -> usize {
    text.lines().count() - 1
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn pull_test_default_row_count() {
    let tmp = TempDir::new().unwrap();
    ok(&["pull-test"], tmp.path());
    let rows = data_rows(&read(tmp.path(), "pull_trials_proposed.csv"))
        + data_rows(&read(tmp.path(), "pull_trials_baseline.csv"));
    assert_eq!(rows, 7 * 10 * 2);
    assert_eq!(data_rows(&read(tmp.path(), "pull_summary_proposed.csv")), 7);
    assert_eq!(data_rows(&read(tmp.path(), "pull_comparison.csv")), 7);
}

#[test]
fn pull_test_single_phi() {
    let tmp = TempDir::new().unwrap();
    ok(&["pull-test", "--phi", "60"], tmp.path());
    let summary = read(tmp.path(), "pull_summary_proposed.csv");
    assert_eq!(data_rows(&summary), 1);
    assert!(summary.lines().nth(1).unwrap().starts_with("60,"));
}

#[test]
fn every_command_is_byte_identical_on_rerun() {
    let runs: [&[&str]; 6] = [
        &["pull-test", "--seed", "7"],
        &["recognize", "--seed", "7"],
        &["recognize", "--seed", "7", "--shape", "concave"],
        &["map", "--seed", "7"],
        &["gen-terrain", "--kind", "wedge", "--phi", "-30"],
        &["dump-config"],
    ];
    for args in runs {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        let out_a = ok(args, a.path());
        let out_b = ok(args, b.path());
        assert_eq!(out_a, out_b, "{args:?} stdout differs");
        if args[0] != "dump-config" {
            let files = dir_bytes(a.path());
            assert!(!files.is_empty());
            assert_eq!(files, dir_bytes(b.path()), "{args:?} files differ");
        }
    }
}

#[test]
fn seeds_change_pull_results() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(&["pull-test", "--phi", "60", "--seed", "1"], a.path());
    ok(&["pull-test", "--phi", "60", "--seed", "2"], b.path());
    assert_ne!(
        read(a.path(), "pull_trials_proposed.csv"),
        read(b.path(), "pull_trials_proposed.csv")
    );
}

#[test]
fn recognize_classifies_both_blocks() {
    for shape in ["convex", "concave"] {
        let tmp = TempDir::new().unwrap();
        ok(&["recognize", "--shape", shape], tmp.path());
        assert_eq!(read(tmp.path(), "classification.txt").trim(), shape);
        assert_eq!(data_rows(&read(tmp.path(), "recognition.csv")), 21);
        assert_eq!(data_rows(&read(tmp.path(), "calibration.csv")), 21);
    }
}

#[test]
fn noiseless_recognition_has_zero_spread() {
    let tmp = TempDir::new().unwrap();
    ok(&["recognize", "--no-noise"], tmp.path());
    let csv = read(tmp.path(), "recognition.csv");
    for line in csv.lines().skip(1) {
        let std: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(std < 1e-6, "{line}");
    }
}

fn ply_vertices(ply: &str) -> usize {
    let n: usize = ply
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .parse()
        .unwrap();
    let body = ply.lines().skip_while(|l| *l != "end_header").skip(1).count();
    assert_eq!(n, body);
    n
}

#[test]
fn map_outputs() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(&["map"], tmp.path());
    assert_eq!(ply_vertices(&read(tmp.path(), "scan_points.ply")), 252);
    assert_eq!(data_rows(&read(tmp.path(), "scan_points.csv")), 252);

    let in_file = read(tmp.path(), "summary.txt").lines().nth(1).unwrap().to_owned();
    let printed = stdout.lines().find_map(|l| l.strip_prefix("e_bar_mm = ")).unwrap();
    assert_eq!(printed, in_file);

    let excl = TempDir::new().unwrap();
    ok(&["map", "--exclude-clamped"], excl.path());
    assert!(ply_vertices(&read(excl.path(), "scan_points.ply")) <= 252);
}

#[test]
fn map_plan_flags() {
    let tmp = TempDir::new().unwrap();
    ok(&["map", "--steps", "4", "--dx-mm", "20"], tmp.path());
    assert_eq!(ply_vertices(&read(tmp.path(), "scan_points.ply")), 4 * 21);
}

#[test]
fn refuses_to_overwrite_without_force() {
    let tmp = TempDir::new().unwrap();
    ok(&["gen-terrain", "--kind", "convex"], tmp.path());
    let before = read(tmp.path(), "terrain_convex.txt");
    let again = pinarray(&["gen-terrain", "--kind", "convex"], tmp.path());
    assert_eq!(again.status.code(), Some(2));
    ok(&["gen-terrain", "--kind", "convex", "--force"], tmp.path());
    assert_eq!(read(tmp.path(), "terrain_convex.txt"), before);
}

#[test]
fn config_errors_exit_2_without_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    let missing = pinarray(&["pull-test", "--config", "/nonexistent/cfg.toml"], &out);
    assert_eq!(missing.status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "x_pich_mm = 14\n").unwrap();
    let unknown = pinarray(&["map", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("x_pich_mm"));

    let zero = pinarray(&["pull-test", "--trials", "0"], &out);
    assert_eq!(zero.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn simulation_errors_exit_3_without_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    // a scan that runs off the end of the terrain
    let o = pinarray(&["map", "--steps", "40"], &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn config_file_overrides_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "pull_trials = 3\npull_phis_deg = [30, 60]\n").unwrap();
    let out = tmp.path().join("out");
    ok(&["pull-test", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(data_rows(&read(&out, "pull_trials_proposed.csv")), 6);

    let dumped = ok(&["dump-config", "--config", cfg.to_str().unwrap()], &out);
    assert!(dumped.contains("pull_trials = 3"));
}

#[test]
fn default_config_dump_round_trips() {
    let tmp = TempDir::new().unwrap();
    let text = ok(&["--dump-default-config"], tmp.path());
    assert!(text.contains("x_pitch_mm = 14.0"));
    assert!(text.contains("elastic_modulus_pa = 2400000000.0"));
    let cfg = tmp.path().join("default.toml");
    fs::write(&cfg, &text).unwrap();
    let again = ok(&["dump-config", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(again, text);
}
