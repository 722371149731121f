//! Landfill hot-spot detection on a synthetic Sentinel-2 style scene.
//!
//! Run with `cargo run --release --example hotspot`. Writes its outputs to
//! a temporary directory and prints the report.

use chrono::{TimeZone, Utc};
use riverwatch::forest::{train_forest, Hyperparams};
use riverwatch::pipeline::{run_hotspot, write_outputs};
use riverwatch::synthetic::{
    land_cover_layout, landfill_layout, render_scene, sample_training_set, SceneSpec,
};

fn main() -> riverwatch::Result<()> {
    let t0 = Utc.with_ymd_and_hms(2019, 7, 2, 9, 50, 0).unwrap();
    let train_map = land_cover_layout(200, 200, 5);
    let train_scene = render_scene(&train_map, &SceneSpec::new("train", t0))?;
    let forest = train_forest(
        &sample_training_set(&train_scene, &train_map, 400, 1)?,
        &Hyperparams::default(),
    )?;

    let map = landfill_layout(300, 300, 40);
    let mut spec = SceneSpec::new("S2A_20190702_landfill", t0);
    spec.sensor = "sentinel2".into();
    spec.pixel_size_m = 10.0;
    spec.seed = 9;
    let scene = render_scene(&map, &spec)?;

    let result = run_hotspot(&scene, &forest)?;
    let out = tempfile::tempdir().expect("temp dir");
    write_outputs(
        out.path(),
        scene.metadata(),
        &result.classification,
        &result.report,
    )?;
    println!("{}", serde_json::to_string_pretty(&result.report).unwrap());
    println!("true landfill area: {} m2", 40 * 40 * 100);
    for entry in std::fs::read_dir(out.path()).unwrap() {
        println!("wrote {}", entry.unwrap().file_name().to_string_lossy());
    }
    Ok(())
}
