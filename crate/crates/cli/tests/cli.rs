use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collinearity::io::{read_image, write_image_png};
use collinearity::stimuli::fixtures::{sem_fixture, wafer_fixture, SEM_SEED};
use collinearity::GrayImage;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collinearity"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn collinearity");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn save(dir: &Path, name: &str, image: &GrayImage) -> PathBuf {
    let p = dir.join(name);
    write_image_png(&p, image).unwrap();
    p
}

fn line_image() -> GrayImage {
    GrayImage::from_fn(60, 90, |y, x| {
        if (29..=31).contains(&y) && (10..80).contains(&x) {
            0.9
        } else {
            0.1
        }
    })
    .unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_blank_table_resolution_gives_zero_pooled_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "blank.png", &GrayImage::filled(1540, 229, 0.0).unwrap());
    let out = tmp.path().join("out");
    let o = run(&["-o", out.to_str().unwrap(), "run", input.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1540x229 -> 513x76x8"));
    for name in ["pooled_max", "collinearity_max", "difference"] {
        let m = read_image(out.join("blank").join(format!("{name}.png"))).unwrap();
        assert_eq!((m.height(), m.width()), (513, 76));
        assert!(m.data().iter().all(|v| *v == 0.0));
        assert!(out.join("blank").join(format!("{name}.csv")).exists());
    }
    let g = read_image(out.join("blank/gabor_max.png")).unwrap();
    assert_eq!((g.height(), g.width()), (1540, 229));
}

#[test]
fn run_is_byte_identical_across_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "line.png", &line_image());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(run(&["-o", dir.to_str().unwrap(), "run", input.to_str().unwrap()])
            .status
            .success());
    }
    let (fa, fb) = (read_dir_sorted(&a.join("line")), read_dir_sorted(&b.join("line")));
    assert_eq!(fa.len(), 9);
    assert_eq!(fa, fb);
}

#[test]
fn manifest_records_config_and_input_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "line.png", &line_image());
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "[dynamics]\nw_col = 1.5\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "-c",
        cfg.to_str().unwrap(),
        "--set",
        "io.csv=false",
        "-o",
        out.to_str().unwrap(),
        "run",
        input.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("line/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["dynamics"]["w_col"], 1.5);
    assert_eq!(m["config"]["gabor"]["kernel_size"], 11);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(!out.join("line/difference.csv").exists());
}

#[test]
fn batch_processes_each_input() {
    let tmp = tempfile::tempdir().unwrap();
    let a = save(tmp.path(), "a.png", &line_image());
    let b = save(tmp.path(), "b.png", &GrayImage::filled(30, 30, 0.5).unwrap());
    let out = tmp.path().join("out");
    let o = run(&[
        "-o",
        out.to_str().unwrap(),
        "run",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (ia, ib) = (text.find("a.png").unwrap(), text.find("b.png").unwrap());
    assert!(ia < ib);
    assert!(out.join("a/manifest.json").exists() && out.join("b/manifest.json").exists());
}

#[test]
fn invalid_config_reports_every_problem() {
    let o = run(&[
        "--set",
        "gabor.kernel_size=10",
        "--set",
        "detector.max_rois=0",
        "kernels",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kernel") && err.contains("max_rois"), "{err}");
}

#[test]
fn unreadable_input_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("broken.png");
    std::fs::write(&bad, b"not an image").unwrap();
    let o = run(&["-o", tmp.path().to_str().unwrap(), "run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.png"));
}

#[test]
fn wafer_marks_fault_pixels() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "wafer.png", &wafer_fixture().image);
    let out = tmp.path().join("out");
    let o = run(&["-o", out.to_str().unwrap(), "wafer", input.to_str().unwrap()]);
    assert!(o.status.success());
    let count: usize = stdout(&o).trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(count > 100, "{count}");
    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("wafer/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["model"]["gabor"]["orientations"].as_array().unwrap().len(), 9);
    assert!(out.join("wafer/fault_detector.png").exists());
}

#[test]
fn sem_baseline_finds_more_rois() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "sem.png", &sem_fixture(SEM_SEED).image);
    let (c, b) = (tmp.path().join("c"), tmp.path().join("b"));
    assert!(run(&["-o", c.to_str().unwrap(), "sem", input.to_str().unwrap()])
        .status
        .success());
    assert!(
        run(&["-o", b.to_str().unwrap(), "sem", "--baseline", input.to_str().unwrap()])
            .status
            .success()
    );
    let rois = |d: &Path| -> Vec<serde_json::Value> {
        serde_json::from_slice(&std::fs::read(d.join("sem/rois.json")).unwrap()).unwrap()
    };
    let (rc, rb) = (rois(&c), rois(&b));
    assert_eq!(rc.len(), 3);
    assert!(rb.len() > rc.len());
    assert_eq!(rc[0]["rank"], 1);
    let raw = std::fs::read_to_string(c.join("sem/rois.json")).unwrap();
    let (r, ce, bb, sc) = (
        raw.find("\"rank\"").unwrap(),
        raw.find("\"center\"").unwrap(),
        raw.find("\"bbox\"").unwrap(),
        raw.find("\"score\"").unwrap(),
    );
    assert!(r < ce && ce < bb && bb < sc);
    let crop = read_image(c.join("sem/roi_001.png")).unwrap();
    assert_eq!((crop.height(), crop.width()), (32, 32));
}

#[test]
fn export_channels_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = save(tmp.path(), "line.png", &line_image());
    let out = tmp.path().join("out");
    assert!(run(&[
        "-o",
        out.to_str().unwrap(),
        "export-channels",
        "--mode",
        "concat",
        input.to_str().unwrap()
    ])
    .status
    .success());
    let c0 = read_image(out.join("line/channel_0.png")).unwrap();
    let c1 = read_image(out.join("line/channel_1.png")).unwrap();
    assert_eq!((c1.height(), c1.width()), (60, 90));
    assert!((c0.get(30, 40) - 0.9).abs() < 1e-4);
    let out2 = tmp.path().join("out2");
    assert!(run(&[
        "-o",
        out2.to_str().unwrap(),
        "export-channels",
        "--mode",
        "suppress",
        input.to_str().unwrap()
    ])
    .status
    .success());
    let s = read_image(out2.join("line/suppressed.png")).unwrap();
    assert!(s.get(30, 45) < 0.9, "collinear line pixels move toward the mean");
    assert!((s.get(5, 5) - 0.1).abs() < 1e-4);
}

#[test]
fn experiment_basic_writes_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["-o", tmp.path().to_str().unwrap(), "experiment", "basic"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("experiment basic: PASS"));
    let csv = std::fs::read_to_string(tmp.path().join("basic.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    let val = |r: &str| r.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!(val(rows[1]) > val(rows[2]));
}

#[test]
fn experiment_band_failure_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "-o",
        tmp.path().to_str().unwrap(),
        "--set",
        "dynamics.w_col=0.0",
        "experiment",
        "basic",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn unknown_experiment_lists_names() {
    let o = run(&["experiment", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["basic", "contrast-gap", "flanker-distance", "occlusion"] {
        assert!(err.contains(name));
    }
}

#[test]
fn kernels_dump_every_orientation() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["-o", tmp.path().to_str().unwrap(), "kernels"]).status.success());
    for i in 0..8 {
        let g = std::fs::read_to_string(tmp.path().join(format!("gabor_{i}.csv"))).unwrap();
        assert_eq!(g.lines().count(), 11);
        let c = std::fs::read_to_string(tmp.path().join(format!("collinearity_{i}.csv"))).unwrap();
        assert_eq!(c.lines().count(), 49);
    }
}
