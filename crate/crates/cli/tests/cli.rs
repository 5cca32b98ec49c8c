use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use houghvp_cli::commands::{MetricsReport, RectifyReport, VpReport};
use houghvp_cli::dataset::{load_dataset, Manifest, Sidecar};
use houghvp_cli::io::read_raw_map;
use serde_json::{json, Value};

fn houghvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_houghvp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = houghvp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    houghvp(args).status.code().unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn docs(dir: &Path, count: usize) -> (PathBuf, PathBuf) {
    let cfg = write_config(dir, json!({"synth": {"width": 200, "height": 260}, "scale_width": 200}));
    let data = dir.join("docs");
    ok(&["synth", "--config", s(&cfg), "--count", &count.to_string(), "--out", s(&data)]);
    (cfg, data)
}

#[test]
fn synth_writes_samples_sidecars_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = docs(dir.path(), 5);
    let m: Manifest = serde_json::from_value(read(&data.join("manifest.json"))).unwrap();
    assert_eq!(m.count, 5);
    assert_eq!(m.samples.len(), 5);
    assert_eq!(m.config["synth"]["width"], 200);
    let sc: Sidecar = serde_json::from_value(read(&data.join(&m.samples[0]))).unwrap();
    assert!(sc.quad.is_some() && sc.horizontal_vp.is_some() && sc.vertical_vp.is_some() && sc.seed == Some(0));
    assert!(data.join(&sc.image).exists());
    let ds = load_dataset(&data).unwrap();
    assert_eq!(ds.records.len(), 5);
    assert_eq!(ds.split(houghvp_cli::dataset::Split::Test).count(), 1);
}

#[test]
fn synth_is_reproducible_and_zero_count_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["synth", "--seed", "4", "--count", "2", "--out", s(&a)]);
    ok(&["synth", "--seed", "4", "--count", "2", "--out", s(&b)]);
    for f in ["sample_00001.png", "sample_00001.json", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let empty = dir.path().join("empty");
    ok(&["synth", "--count", "0", "--out", s(&empty)]);
    let m = read(&empty.join("manifest.json"));
    assert_eq!(m["count"], 0);
    assert_eq!(m["samples"], json!([]));
}

#[test]
fn fht_writes_raw_map_header_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = docs(dir.path(), 1);
    let prefix = dir.path().join("map");
    ok(&["fht", s(&data.join("sample_00000.png")), "--quadrant", "h34", "--out", s(&prefix)]);
    let (h, values) = read_raw_map(&prefix).unwrap();
    // 200 wide is padded to 256 along the integration axis.
    assert_eq!(h.dims, [512, 256 + 260]);
    assert_eq!((h.src_w, h.src_h, h.quadrant.as_str()), (256, 260, "H34"));
    assert_eq!(values.len(), 512 * 516);
    assert_eq!(std::fs::metadata(dir.path().join("map.f32")).unwrap().len(), 4 * 512 * 516);
    let preview = image::open(dir.path().join("map.png")).unwrap();
    assert_eq!((preview.width(), preview.height()), (516, 512));
    assert_eq!(code(&["fht", s(&data.join("sample_00000.png")), "--quadrant", "h5", "--out", s(&prefix)]), 2);
}

#[test]
fn detect_then_rectify_from_file_inline_and_auto() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, data) = docs(dir.path(), 1);
    let img = data.join("sample_00000.png");
    let vp_path = dir.path().join("vp.json");
    let stdout = ok(&["detect-vp", s(&img), "--config", s(&cfg), "--out", s(&vp_path)]);
    let report: VpReport = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report, serde_json::from_value(read(&vp_path)).unwrap());
    assert_eq!((report.format.as_str(), report.version), ("houghvp-vp", 1));
    assert_eq!((report.width, report.height, report.working_width), (200, 260, 200));
    assert_eq!(report.config.scale_width, Some(200));

    let out1 = dir.path().join("r1.png");
    let echoed: Value = serde_json::from_str(&ok(&["rectify", s(&img), "--vps", s(&vp_path), "--out", s(&out1)])).unwrap();
    let side: RectifyReport = serde_json::from_value(read(&dir.path().join("r1.png.json"))).unwrap();
    assert_eq!(echoed["homography"], json!(side.homography));
    assert!(image::open(&out1).is_ok());

    let [h, v] = [report.horizontal.vp, report.vertical.vp].map(|p| format!("{},{},{}", p[0], p[1], p[2]));
    let out2 = dir.path().join("r2.png");
    ok(&["rectify", s(&img), "--vp-h", &h, "--vp-v", &v, "--out", s(&out2)]);
    let side2: RectifyReport = serde_json::from_value(read(&dir.path().join("r2.png.json"))).unwrap();
    assert_eq!(side2.homography, side.homography);

    let out3 = dir.path().join("r3.png");
    ok(&["rectify", s(&img), "--auto", "--config", s(&cfg), "--out", s(&out3)]);
    let side3: RectifyReport = serde_json::from_value(read(&dir.path().join("r3.png.json"))).unwrap();
    assert_eq!(side3.homography, side.homography);

    assert_eq!(code(&["rectify", s(&img), "--out", s(&out3)]), 2);
    assert_eq!(code(&["rectify", s(&img), "--vp-h", "1,2", "--vp-v", "x,y,z", "--out", s(&out3)]), 2);
}

#[test]
fn eval_reports_before_and_after() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, data) = docs(dir.path(), 6);
    let out = dir.path().join("metrics.json");
    ok(&["eval", "--data", s(&data), "--source", "truth", "--out", s(&out)]);
    let m: MetricsReport = serde_json::from_value(read(&out)).unwrap();
    assert_eq!((m.format.as_str(), m.version, m.documents, m.failed), ("houghvp-metrics", 1, 6, 0));
    let (b, a) = (m.before.unwrap(), m.after.unwrap());
    assert!(b.d1 > 0.5 && a.d1 < 1e-6 && a.d2 < 1e-6, "{b:?} {a:?}");
    assert!(m.vp_error.is_none());

    let out2 = dir.path().join("metrics2.json");
    ok(&["eval", "--data", s(&data), "--source", "classical", "--config", s(&cfg), "--out", s(&out2)]);
    let m2: MetricsReport = serde_json::from_value(read(&out2)).unwrap();
    assert_eq!(m2.per_document.len(), 6);
    assert!(m2.vp_error.unwrap().count + m2.failed == 6);
    assert!(m2.after.unwrap().d1 < m2.before.unwrap().d1);
}

#[test]
fn ingestion_drops_quads_with_two_corners_outside() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = docs(dir.path(), 3);
    let path = data.join("sample_00001.json");
    let mut sc = read(&path);
    sc["quad"]["corners"][0] = json!({"x": -5.0, "y": -5.0});
    sc["quad"]["corners"][1] = json!({"x": 250.0, "y": 3.0});
    std::fs::write(&path, sc.to_string()).unwrap();
    let path2 = data.join("sample_00002.json");
    let mut sc2 = read(&path2);
    sc2["quad"]["corners"][0] = json!({"x": -5.0, "y": 10.0});
    std::fs::write(&path2, sc2.to_string()).unwrap();
    let ds = load_dataset(&data).unwrap();
    assert_eq!((ds.records.len(), ds.dropped_outside), (2, 1));
    let out = dir.path().join("m.json");
    ok(&["eval", "--data", s(&data), "--source", "truth", "--out", s(&out)]);
    assert_eq!(read(&out)["dropped_outside"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    assert_eq!(code(&["detect-vp", s(&missing)]), 2);
    let jpg = dir.path().join("x.jpg");
    std::fs::write(&jpg, [0xFF, 0xD8, 0xFF, 0xE0, 0, 0x10, b'J', b'F', b'I', b'F', 0]).unwrap();
    assert_eq!(code(&["detect-vp", s(&jpg)]), 2);
    let bad = write_config(dir.path(), json!({"classical": {"percentile": 2.0}}));
    assert_eq!(code(&["synth", "--config", s(&bad), "--count", "1", "--out", s(dir.path())]), 2);
    std::fs::write(dir.path().join("typo.json"), r#"{"sed": 1}"#).unwrap();
    assert_eq!(code(&["synth", "--config", s(&dir.path().join("typo.json")), "--count", "1", "--out", s(dir.path())]), 2);
    let blank = dir.path().join("blank.png");
    image::GrayImage::new(40, 30).save(&blank).unwrap();
    assert_eq!(code(&["detect-vp", s(&blank)]), 3);
    assert_eq!(code(&["detect-vp", s(&blank), "--method", "network"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn color_images_are_read_as_luma() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.png");
    let mut img = image::RgbImage::new(64, 48);
    for (x, _, px) in img.enumerate_pixels_mut() {
        if x % 9 == 0 {
            *px = image::Rgb([255, 40, 10]);
        }
    }
    img.save(&p).unwrap();
    let g = houghvp_cli::io::load_gray(&p).unwrap();
    assert!((g.get(0, 0) - (0.299 + 0.587 * 40.0 / 255.0 + 0.114 * 10.0 / 255.0)).abs() < 1e-6);
    let out = dir.path().join("vp.json");
    ok(&["detect-vp", s(&p), "--out", s(&out)]);
    assert_eq!(read(&out)["working_width"], 400);
}

fn bundle_config(dir: &Path, extra: Value) -> PathBuf {
    let mut v = json!({
        "seed": 2,
        "network": {"arch": {"kind": "compact", "filters": 2}, "input_width": 48},
        "train": {"lr": 0.05, "epochs": 2, "batch": 4},
        "synth": {"kind": "bundle_pair", "width": 48, "height": 48, "bundle_lines": [4, 6]}
    });
    if let (Some(base), Some(more)) = (v.as_object_mut(), extra.as_object()) {
        for (k, val) in more {
            base.insert(k.clone(), val.clone());
        }
    }
    write_config(dir, v)
}

#[test]
fn train_writes_checkpoints_log_and_report_then_detects() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundle_config(dir.path(), json!({}));
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--count", "10", "--out", s(&data)]);
    let out = dir.path().join("model");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    let log = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "branch,epoch,loss");
    assert_eq!(lines.len(), 5);
    let report = read(&out.join("train_report.json"));
    assert_eq!(report["branches"].as_array().unwrap().len(), 2);
    assert_eq!(report["branches"][0]["heldout_samples"], 2);
    let ck = read(&out.join("vertical.ckpt.json"));
    assert_eq!((ck["epoch"].as_u64(), ck["config"]["seed"].as_u64()), (Some(2), Some(2)));

    let img = data.join("sample_00009.png");
    let vp: VpReport = serde_json::from_str(&ok(&["detect-vp", s(&img), "--method", "network", "--weights", s(&out)])).unwrap();
    assert_eq!(vp.working_width, 48);
    ok(&["rectify", s(&img), "--auto", "--method", "network", "--weights", s(&out), "--out", s(&dir.path().join("r.png"))]);
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg2 = bundle_config(dir.path(), json!({}));
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg2), "--count", "8", "--out", s(&data)]);
    let partial = dir.path().join("partial");
    ok(&["train", "--config", s(&cfg2), "--data", s(&data), "--out", s(&partial)]);
    let cfg3 = bundle_config(dir.path(), json!({"train": {"lr": 0.05, "epochs": 3, "batch": 4}}));
    ok(&["train", "--config", s(&cfg3), "--data", s(&data), "--out", s(&partial), "--resume"]);
    let full = dir.path().join("full");
    ok(&["train", "--config", s(&cfg3), "--data", s(&data), "--out", s(&full)]);
    for f in ["vertical.ckpt.json", "horizontal.ckpt.json", "loss.csv"] {
        assert_eq!(std::fs::read(partial.join(f)).unwrap(), std::fs::read(full.join(f)).unwrap(), "{f}");
    }
    assert_eq!(read(&partial.join("train_report.json"))["branches"][0]["resumed_from_epoch"], 2);
}

#[test]
fn divergence_aborts_and_keeps_the_last_good_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundle_config(dir.path(), json!({"train": {"lr": 0.05, "epochs": 1, "batch": 4}}));
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--count", "8", "--out", s(&data)]);
    let out = dir.path().join("model");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    let good = std::fs::read(out.join("vertical.ckpt.json")).unwrap();
    let wild = bundle_config(dir.path(), json!({"train": {"lr": 1e300, "epochs": 3, "batch": 4}}));
    let res = houghvp(&["train", "--config", s(&wild), "--data", s(&data), "--out", s(&out), "--resume"]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("last good checkpoint"));
    assert_eq!(std::fs::read(out.join("vertical.ckpt.json")).unwrap(), good);
}
