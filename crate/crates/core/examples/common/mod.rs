//! Demo fixture shared by the monitor examples: a trained model and an
//! ingest directory with a landfill that grows from scene to scene.

use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use riverwatch::forest::{save_model, train_forest, Hyperparams};
use riverwatch::monitor::Aoi;
use riverwatch::pipeline::PipelineKind;
use riverwatch::raster::save_scene;
use riverwatch::synthetic::{
    land_cover_layout, landfill_layout, render_scene, sample_training_set, SceneSpec,
};

pub fn prepare(root: &Path, sides: &[usize]) -> riverwatch::Result<Aoi> {
    let t0 = Utc.with_ymd_and_hms(2021, 5, 1, 9, 30, 0).unwrap();
    let train_map = land_cover_layout(160, 160, 2);
    let train_scene = render_scene(&train_map, &SceneSpec::new("train", t0))?;
    let data = sample_training_set(&train_scene, &train_map, 300, 1)?;
    let model_path = root.join("model.json");
    save_model(&train_forest(&data, &Hyperparams::default())?, &model_path)?;

    let ingest_dir: PathBuf = root.join("ingest");
    for (i, &side) in sides.iter().enumerate() {
        let mut spec = SceneSpec::new(format!("scene-{i}"), t0 + Duration::days(7 * i as i64));
        spec.seed = i as u64;
        let scene = render_scene(&landfill_layout(160, 160, side), &spec)?;
        save_scene(&scene, ingest_dir.join(format!("drop-{}", sides.len() - i)))?;
    }
    Ok(Aoi {
        aoi_id: "kiskore".into(),
        name: "Kiskore reservoir".into(),
        pipeline: PipelineKind::Hotspot,
        model_path,
        alert_threshold: 0.2,
        notify: vec!["mailto:ops@example.org".into()],
        ingest_dir,
        kernel_size: None,
    })
}
