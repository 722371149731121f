use super::TrainingSet;
use crate::classes::default_class_names;
use crate::error::{Error, Result};
use crate::indices::{compute_feature_stack, FeatureMode};
use crate::raster::Raster;

/// Label raster value for pixels without a label. Class `c` is stored as `c + 1`.
pub const LABEL_UNLABELED: f32 = 0.0;

/// Collects every labeled, usable pixel of `scene` as a training sample.
///
/// `labels` is a single-band scene on the same grid; nodata counts as unlabeled.
pub fn training_set_from_scene(
    scene: &Raster,
    labels: &Raster,
    mode: FeatureMode,
) -> Result<TrainingSet> {
    if labels.band_count() != 1 {
        return Err(Error::Shape(format!(
            "label raster must have one band, has {}",
            labels.band_count()
        )));
    }
    if labels.width() != scene.width() || labels.height() != scene.height() {
        return Err(Error::Shape(format!(
            "label raster is {}x{}, scene is {}x{}",
            labels.width(),
            labels.height(),
            scene.width(),
            scene.height()
        )));
    }
    let class_names = default_class_names();
    let stack = compute_feature_stack(scene, mode)?;
    let plane = labels.band_at(0);
    let mut features = Vec::new();
    let mut out_labels = Vec::new();
    let mut buf = vec![0f32; stack.feature_count()];
    for (i, &v) in plane.iter().enumerate() {
        if labels.metadata().is_nodata(v) || v == LABEL_UNLABELED {
            continue;
        }
        if v.fract() != 0.0 || v < 1.0 || v > class_names.len() as f32 {
            return Err(Error::Training(format!(
                "label pixel {i} holds {v}; expected 0 or 1..={}",
                class_names.len()
            )));
        }
        if !stack.valid().bits()[i] {
            continue;
        }
        stack.pixel_into(i, &mut buf);
        features.extend_from_slice(&buf);
        out_labels.push(v as u8 - 1);
    }
    if out_labels.is_empty() {
        return Err(Error::Training(
            "no labeled pixels with usable features".into(),
        ));
    }
    TrainingSet::new(
        features,
        out_labels,
        class_names,
        stack.feature_names().to_vec(),
    )
}
