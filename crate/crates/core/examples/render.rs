//! Class overlay and confidence heatmap of a small classification.
//!
//! Run with `cargo run --example render -- out_dir` to keep the PNGs.

use riverwatch::classes::{default_class_names, ClassRaster, NODATA_CLASS};
use riverwatch::pipeline::{render_classification, render_heatmap};

fn main() -> riverwatch::Result<()> {
    let (w, h) = (64, 48);
    let mut ids = Vec::new();
    let mut conf = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if y < 4 {
                ids.push(NODATA_CLASS);
                conf.push(0.0);
            } else {
                ids.push((x / 13) as u8);
                conf.push(0.6 + 0.4 * y as f32 / h as f32);
            }
        }
    }
    let cr = ClassRaster::new(w, h, ids, conf, default_class_names())?;
    let overlay = render_classification(&cr)?;
    let heatmap = render_heatmap(&cr);
    println!("overlay pixel (10, 0) = {:?}", overlay.pixel(10, 0));
    println!("heatmap pixel (47, 0) = {:?}", heatmap.pixel(47, 0));

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).expect("output dir");
        std::fs::write(format!("{dir}/overlay.png"), overlay.to_png()?).expect("write");
        std::fs::write(format!("{dir}/heatmap.png"), heatmap.to_png()?).expect("write");
        println!("wrote {dir}/overlay.png and {dir}/heatmap.png");
    }
    Ok(())
}
