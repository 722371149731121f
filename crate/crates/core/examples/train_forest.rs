//! Train a forest on labeled pixels, save it, reload it and classify.
//!
//! Run with `cargo run --release --example train_forest`.

use chrono::{TimeZone, Utc};
use riverwatch::classes::CLASS_NAMES;
use riverwatch::forest::{load_model, save_model, train_forest, Hyperparams};
use riverwatch::pipeline::classify;
use riverwatch::synthetic::{land_cover_layout, render_scene, sample_training_set, SceneSpec};

fn main() -> riverwatch::Result<()> {
    let t0 = Utc.with_ymd_and_hms(2021, 6, 1, 9, 30, 0).unwrap();
    let map = land_cover_layout(240, 160, 1);
    let mut spec = SceneSpec::new("train", t0);
    spec.noise = 0.02;
    let scene = render_scene(&map, &spec)?;
    let data = sample_training_set(&scene, &map, 300, 7)?;
    println!(
        "{} samples, counts per class {:?}",
        data.len(),
        data.class_counts()
    );

    let forest = train_forest(&data, &Hyperparams::with_seed(7))?;
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("model.json");
    save_model(&forest, &path)?;
    let forest = load_model(&path)?;
    let nodes: usize = forest.trees().iter().map(|t| t.node_count()).sum();
    println!("{} trees, {nodes} nodes total", forest.n_trees());

    // A fresh acquisition of the same ground.
    spec.seed = 1;
    spec.scene_id = "test".into();
    let test_scene = render_scene(&map, &spec)?;
    let classes = classify(&test_scene, &forest)?;
    let correct = classes
        .class_ids()
        .iter()
        .zip(&map.classes)
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "pixel accuracy on a new scene: {:.4}",
        correct as f64 / map.classes.len() as f64
    );
    for (c, name) in CLASS_NAMES.iter().enumerate() {
        println!("  {name:<15} {:>6} px", classes.count_class(c as u8));
    }
    Ok(())
}
