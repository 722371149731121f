//! Spectral indices of a synthetic scene, per land-cover class.
//!
//! Run with `cargo run --example indices`.

use chrono::{TimeZone, Utc};
use riverwatch::classes::CLASS_NAMES;
use riverwatch::indices::{compute_index, IndexKind};
use riverwatch::synthetic::{land_cover_layout, render_scene, SceneSpec};

fn main() -> riverwatch::Result<()> {
    let map = land_cover_layout(200, 150, 3);
    let spec = SceneSpec::new("demo", Utc.with_ymd_and_hms(2021, 6, 1, 9, 30, 0).unwrap());
    let scene = render_scene(&map, &spec)?;

    print!("{:<15}", "class");
    for kind in IndexKind::ALL {
        print!("{:>9}", kind.name());
    }
    println!();
    let planes: Vec<_> = IndexKind::ALL
        .iter()
        .map(|&k| compute_index(&scene, k))
        .collect::<Result<_, _>>()?;
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        print!("{name:<15}");
        for plane in &planes {
            let vals: Vec<f64> = plane
                .values
                .iter()
                .zip(&map.classes)
                .filter(|(v, &c)| c as usize == class && v.is_finite())
                .map(|(&v, _)| v as f64)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            print!("{mean:>9.3}");
        }
        println!();
    }
    Ok(())
}
