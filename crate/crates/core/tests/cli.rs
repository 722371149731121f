mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use riverwatch::classes::ClassRaster;
use riverwatch::pipeline::{render_heatmap, DetectionReport, RgbaImage};
use riverwatch::raster::{load_scene, save_scene, BandLabel};
use riverwatch::synthetic::{
    blockage_layout, label_raster, land_cover_layout, render_scene, SceneSpec,
};

fn riverwatch(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_riverwatch"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Scene plus a sparse label raster.
fn labeled_scene(dir: &Path) {
    let map = land_cover_layout(80, 60, 8);
    let scene = render_scene(&map, &SceneSpec::new("cli", t0())).unwrap();
    save_scene(
        &label_raster(&map, scene.metadata(), 3).unwrap(),
        dir.join("labels"),
    )
    .unwrap();
    save_scene(&scene, dir.join("scene")).unwrap();
}

#[test]
fn index_pi_matches_direct_computation() {
    let d = tempfile::tempdir().unwrap();
    labeled_scene(d.path());
    let out = d.path().join("pi");
    ok(riverwatch(&[
        &"index",
        &"--scene",
        &d.path().join("scene"),
        &"--index",
        &"pi",
        &"--out",
        &out,
    ]));
    let scene = load_scene(d.path().join("scene")).unwrap();
    let pi = load_scene(&out).unwrap();
    assert_eq!(pi.band_count(), 1);
    let red = scene.band(&BandLabel::Red).unwrap();
    let nir = scene.band(&BandLabel::Nir).unwrap();
    for i in 0..red.len() {
        let expect = nir[i] as f64 / (nir[i] as f64 + red[i] as f64);
        assert!((pi.samples()[i] as f64 - expect).abs() < 1e-6);
    }

    let stack = d.path().join("stack");
    ok(riverwatch(&[
        &"index",
        &"--scene",
        &d.path().join("scene"),
        &"--out",
        &stack,
    ]));
    assert_eq!(load_scene(&stack).unwrap().band_count(), 9);
}

#[test]
fn cv_is_deterministic_and_prints_seed() {
    let d = tempfile::tempdir().unwrap();
    labeled_scene(d.path());
    let run = || {
        let out = ok(riverwatch(&[
            &"cv",
            &"--scene",
            &d.path().join("scene"),
            &"--labels",
            &d.path().join("labels"),
            &"--k",
            &"5",
            &"--seed",
            &"7",
            &"--trees",
            &"20",
        ]));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a["seed"], 7);
    assert!(a["accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn train_is_byte_identical_across_threads_and_blockage_writes_outputs() {
    let d = tempfile::tempdir().unwrap();
    labeled_scene(d.path());
    let (m1, m8) = (d.path().join("m1.json"), d.path().join("m8.json"));
    for (threads, path) in [("1", &m1), ("8", &m8)] {
        ok(riverwatch(&[
            &"--threads",
            &threads,
            &"train",
            &"--scene",
            &d.path().join("scene"),
            &"--labels",
            &d.path().join("labels"),
            &"--out",
            path,
            &"--trees",
            &"30",
        ]));
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m8).unwrap());
    let model: serde_json::Value = serde_json::from_slice(&fs::read(&m1).unwrap()).unwrap();
    assert_eq!(model["hyperparams"]["seed"], 42);

    let layout = blockage_layout(96, 96);
    save_scene(
        &render_scene(&layout.map, &SceneSpec::new("b", t0())).unwrap(),
        d.path().join("river"),
    )
    .unwrap();
    let out = d.path().join("blk");
    ok(riverwatch(&[
        &"blockage",
        &"--scene",
        &d.path().join("river"),
        &"--model",
        &m1,
        &"--kernel-size",
        &"5",
        &"--out",
        &out,
    ]));
    for name in [
        "report.json",
        "classified/scene.json",
        "classified/bands.bin",
        "overlay.png",
        "heatmap.png",
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let report: DetectionReport =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.kernel_size, Some(5));

    // render reproduces the pipeline's heatmap from the classified scene.
    let r = d.path().join("render");
    ok(riverwatch(&[
        &"render",
        &"--classified",
        &out.join("classified"),
        &"--out",
        &r,
    ]));
    assert_eq!(
        fs::read(r.join("heatmap.png")).unwrap(),
        fs::read(out.join("heatmap.png")).unwrap()
    );
    let cr = ClassRaster::from_raster(
        &load_scene(out.join("classified")).unwrap(),
        riverwatch::classes::default_class_names(),
    )
    .unwrap();
    let png = RgbaImage::from_png(&fs::read(r.join("heatmap.png")).unwrap()).unwrap();
    assert_eq!(png, render_heatmap(&cr));

    let classified = d.path().join("cls");
    ok(riverwatch(&[
        &"classify",
        &"--scene",
        &d.path().join("river"),
        &"--model",
        &m1,
        &"--out",
        &classified,
    ]));
    assert_eq!(load_scene(&classified).unwrap().band_count(), 2);
}

#[test]
fn exit_codes_and_no_partial_outputs() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(riverwatch(&[&"bogus"]).status.code(), Some(1));
    let usage = riverwatch(&[]);
    assert_eq!(usage.status.code(), Some(1));
    assert!(!usage.stderr.is_empty() && usage.stdout.is_empty());
    for sub in [
        "index", "train", "cv", "classify", "hotspot", "blockage", "render", "serve",
    ] {
        let help = riverwatch(&[&sub, &"--help"]);
        assert_eq!(help.status.code(), Some(0), "{sub}");
        assert!(
            String::from_utf8_lossy(&help.stdout).contains("--"),
            "{sub}"
        );
    }
    assert_eq!(
        riverwatch(&[&"monitor", &"poll", &"--help"]).status.code(),
        Some(0)
    );
    assert_eq!(
        riverwatch(&[&"blockage", &"--kernel-size", &"x"])
            .status
            .code(),
        Some(1)
    );

    labeled_scene(d.path());
    let out = d.path().join("o");
    // Missing model: data error, nothing written.
    let r = riverwatch(&[
        &"hotspot",
        &"--scene",
        &d.path().join("scene"),
        &"--model",
        &d.path().join("none.json"),
        &"--out",
        &out,
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(d.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
        .collect();
    assert!(leftovers.is_empty());

    // Even kernel: data error.
    let m = write_model(d.path());
    let r = riverwatch(&[
        &"blockage",
        &"--scene",
        &d.path().join("scene"),
        &"--model",
        &m,
        &"--kernel-size",
        &"4",
        &"--out",
        &out,
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn monitor_register_and_poll() {
    let d = tempfile::tempdir().unwrap();
    let model = write_model(d.path());
    let ingest = d.path().join("in");
    write_waste_scene(&ingest.join("a"), "s1", 0, 100);
    let aoi_file = d.path().join("aoi.json");
    fs::write(
        &aoi_file,
        serde_json::to_string(&aoi("m", &model, &ingest, vec![])).unwrap(),
    )
    .unwrap();
    let root = d.path().join("root");
    ok(riverwatch(&[
        &"monitor",
        &"register",
        &"--root",
        &root,
        &"--aoi",
        &aoi_file,
    ]));
    let out = ok(riverwatch(&[&"monitor", &"poll", &"--root", &root]));
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["ingested"][0]["scene_id"], "s1");
    let out = ok(riverwatch(&[&"monitor", &"poll", &"--root", &root]));
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["ingested"], serde_json::json!([]));
}
