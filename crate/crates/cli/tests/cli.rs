//! End-to-end tests of the `wildtrack` binary: subcommand round trips and
//! exit-code contracts.

use std::path::Path;
use std::process::{Command, Output};

fn wildtrack(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wildtrack"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run wildtrack")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth_scene(dir: &Path, out_name: &str, seed: &str) {
    let out = wildtrack(
        &[
            "synth",
            "--out",
            out_name,
            "--width",
            "320",
            "--height",
            "240",
            "--frames",
            "12",
            "--seed",
            seed,
            "--object",
            "0,40,30,50,60,2,1,noise",
            "--object",
            "1,30,30,200,120,-2,0,checker",
        ],
        dir,
    );
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "a", "7");
    synth_scene(dir.path(), "b", "7");
    for name in ["000001.ppm", "000007.ppm", "gt.txt", "manifest.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical-seed runs");
    }
}

#[test]
fn synth_track_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "seq", "11");

    let out = wildtrack(
        &[
            "track",
            "--frames",
            "seq",
            "--detector",
            "oracle:seq/gt.txt",
            "--output",
            "tracks.csv",
            "--windows-per-frame",
            "all",
            "--conf-validate-threshold",
            "0.7",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "track failed: {}", stderr(&out));
    assert!(dir.path().join("tracks.csv").exists());
    assert!(dir.path().join("tracks.csv.timing.txt").exists());
    let manifest =
        std::fs::read_to_string(dir.path().join("tracks.csv.manifest.txt")).unwrap();
    assert!(manifest.contains("command = track"));
    assert!(manifest.contains("detector = oracle:seq/gt.txt"));
    assert!(manifest.contains("window_size = "));

    let out = wildtrack(
        &["eval", "--gt", "seq/gt.txt", "--result", "tracks.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "eval failed: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("MOTA     = 1.0000"), "report was:\n{text}");
    assert!(text.contains("IDF1     = 1.0000"), "report was:\n{text}");
}

#[test]
fn eval_scores_identity_switch_fixture() {
    // One object over three frames; prediction switches identity on the
    // last frame: MOTA = 1 - 1/3, IDF1 = 2/3.
    let dir = tempfile::tempdir().unwrap();
    let gt = "1,1,10,10,20,20,1,0,1\n2,1,10,10,20,20,1,0,1\n3,1,10,10,20,20,1,0,1\n";
    let pred = "1,5,10,10,20,20,1,0,1\n2,5,10,10,20,20,1,0,1\n3,6,10,10,20,20,1,0,1\n";
    std::fs::write(dir.path().join("gt.txt"), gt).unwrap();
    std::fs::write(dir.path().join("pred.txt"), pred).unwrap();
    let out = wildtrack(&["eval", "--gt", "gt.txt", "--result", "pred.txt"], dir.path());
    assert!(out.status.success(), "eval failed: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("MOTA     = 0.6667"), "report was:\n{text}");
    assert!(text.contains("IDSW     = 1"), "report was:\n{text}");
}

#[test]
fn malformed_result_csv_exits_2_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gt.txt"), "1,1,10,10,20,20,1,0,1\n").unwrap();
    std::fs::write(dir.path().join("bad.csv"), "1,1,10,10,20,20,1,0,1\nnot a row\n").unwrap();
    let out = wildtrack(&["eval", "--gt", "gt.txt", "--result", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.csv:2"), "stderr: {}", stderr(&out));
}

#[test]
fn frame_range_mismatch_exits_2_with_ranges() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gt.txt"), "1,1,10,10,20,20,1,0,1\n").unwrap();
    std::fs::write(
        dir.path().join("pred.txt"),
        "1,1,10,10,20,20,1,0,1\n9,1,10,10,20,20,1,0,1\n",
    )
    .unwrap();
    let out = wildtrack(&["eval", "--gt", "gt.txt", "--result", "pred.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains('9') && err.contains('1'), "stderr: {err}");
}

#[test]
fn missing_ground_truth_exits_3_with_path() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "seq", "3");
    let out = wildtrack(
        &[
            "track",
            "--frames",
            "seq",
            "--detector",
            "oracle:nope/gt.txt",
            "--output",
            "t.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("nope/gt.txt"), "stderr: {}", stderr(&out));
}

#[test]
fn detector_startup_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "seq", "3");
    let out = wildtrack(
        &["track", "--frames", "seq", "--detector", "exec:false", "--output", "t.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bench_prints_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "seq", "5");
    let out = wildtrack(
        &[
            "bench",
            "--frames",
            "seq",
            "--settings",
            "1,2,all",
            "--detector",
            "stub:1",
            "--output",
            "bench.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "bench failed: {}", stderr(&out));
    // Header line plus one row per setting.
    assert_eq!(stdout(&out).lines().count(), 4, "stdout: {}", stdout(&out));
    let table = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(dir.path().join("bench.csv.manifest.txt").exists());
}

#[test]
fn synth_with_zero_objects_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let out = wildtrack(
        &["synth", "--out", "empty", "--width", "64", "--height", "48", "--frames", "3"],
        dir.path(),
    );
    assert!(out.status.success(), "synth failed: {}", stderr(&out));
    assert!(dir.path().join("empty/000003.ppm").exists());
    let gt = std::fs::read_to_string(dir.path().join("empty/gt.txt")).unwrap();
    assert!(gt.trim().is_empty());
}

#[test]
fn bad_scene_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scene.txt"), "wobble = 4\n").unwrap();
    let out = wildtrack(&["synth", "--out", "x", "--spec", "scene.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key"), "stderr: {}", stderr(&out));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    synth_scene(dir.path(), "seq", "9");
    std::fs::write(dir.path().join("cfg.txt"), "window_size = 320\npyramid_levels = 2\n").unwrap();
    let out = wildtrack(
        &[
            "track",
            "--frames",
            "seq",
            "--detector",
            "oracle:seq/gt.txt",
            "--output",
            "t.csv",
            "--config",
            "cfg.txt",
            "--pyramid-levels",
            "3",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "track failed: {}", stderr(&out));
    let manifest = std::fs::read_to_string(dir.path().join("t.csv.manifest.txt")).unwrap();
    assert!(manifest.contains("window_size = 320"), "manifest:\n{manifest}");
    assert!(manifest.contains("pyramid_levels = 3"), "manifest:\n{manifest}");
}
