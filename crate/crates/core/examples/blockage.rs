//! River-blockage detection: a waste island in a river plus land specks.
//!
//! Run with `cargo run --release --example blockage`.

use chrono::{TimeZone, Utc};
use riverwatch::classes::WASTE;
use riverwatch::forest::{train_forest, Hyperparams};
use riverwatch::morphology::Kernel;
use riverwatch::pipeline::run_blockage;
use riverwatch::synthetic::{blockage_layout, render_scene, sample_training_set, SceneSpec};

fn main() -> riverwatch::Result<()> {
    let t0 = Utc.with_ymd_and_hms(2021, 6, 1, 9, 30, 0).unwrap();
    let layout = blockage_layout(256, 256);
    let scene = render_scene(&layout.map, &SceneSpec::new("tisza", t0))?;
    let forest = train_forest(
        &sample_training_set(&scene, &layout.map, 200, 3)?,
        &Hyperparams::default(),
    )?;

    for size in [3, 5, 7] {
        let r = run_blockage(&scene, &forest, Kernel::new(size)?)?;
        let specks_kept = layout
            .specks
            .iter()
            .filter(|&&(y, x)| r.classification.class_at(y, x) == WASTE)
            .count();
        println!(
            "kernel {size}: mask {} -> {} px, waste {} px ({:.0} m2), specks kept {specks_kept}",
            r.binary.count_ones(),
            r.cleaned.count_ones(),
            r.report.waste_pixels,
            r.report.waste_area_m2,
        );
    }
    Ok(())
}
