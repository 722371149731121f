//! Hot-spot and river-blockage detection.
//!
//! The hot-spot pipeline is a single classification pass. The blockage
//! pipeline keeps waste and water pixels, opens that mask to drop small
//! specks away from the river, dilates the remainder to widen its contours,
//! and only counts waste inside the cleaned mask.

pub mod render;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classes::{ClassRaster, WASTE, WATER};
use crate::error::{Error, Result};
use crate::forest::{predict_raster, Forest};
use crate::fsutil::StagedDir;
use crate::indices::{compute_feature_stack, FeatureMode, CROSS_SENSOR_FEATURES};
use crate::mask::BinaryMask;
use crate::morphology::{dilate, open, Kernel};
use crate::raster::{pixel_area_m2, save_scene, Raster, SceneMetadata};

pub use render::{render_classification, render_heatmap, RgbaImage};

pub const REPORT_FILE: &str = "report.json";
pub const CLASSIFIED_DIR: &str = "classified";
pub const OVERLAY_FILE: &str = "overlay.png";
pub const HEATMAP_FILE: &str = "heatmap.png";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    #[default]
    Hotspot,
    Blockage,
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineKind::Hotspot => "hotspot",
            PipelineKind::Blockage => "blockage",
        })
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hotspot" => Ok(PipelineKind::Hotspot),
            "blockage" => Ok(PipelineKind::Blockage),
            _ => Err(Error::Metadata(format!("unknown pipeline `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub scene_id: String,
    pub timestamp: DateTime<Utc>,
    pub pipeline: PipelineKind,
    pub waste_pixels: u64,
    pub waste_area_m2: f64,
    pub total_valid_pixels: u64,
    pub waste_fraction: f64,
    /// Set when the scene had no usable pixels at all.
    pub quality_warning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
}

impl DetectionReport {
    pub fn new(
        metadata: &SceneMetadata,
        pipeline: PipelineKind,
        waste_pixels: u64,
        total_valid_pixels: u64,
    ) -> Self {
        DetectionReport {
            scene_id: metadata.scene_id.clone(),
            timestamp: metadata.acquired_at,
            pipeline,
            waste_pixels,
            waste_area_m2: waste_pixels as f64 * pixel_area_m2(metadata),
            total_valid_pixels,
            waste_fraction: if total_valid_pixels == 0 {
                0.0
            } else {
                waste_pixels as f64 / total_valid_pixels as f64
            },
            quality_warning: total_valid_pixels == 0,
            kernel_size: None,
        }
    }
}

/// Feature layout a forest was trained on.
pub fn feature_mode_for(forest: &Forest) -> FeatureMode {
    if forest.feature_names() == CROSS_SENSOR_FEATURES {
        FeatureMode::CrossSensor
    } else {
        FeatureMode::SentinelFull
    }
}

pub fn classify(scene: &Raster, forest: &Forest) -> Result<ClassRaster> {
    let stack = compute_feature_stack(scene, feature_mode_for(forest))?;
    predict_raster(forest, &stack)
}

#[derive(Debug, Clone)]
pub struct HotspotResult {
    pub classification: ClassRaster,
    pub report: DetectionReport,
}

pub fn run_hotspot(scene: &Raster, forest: &Forest) -> Result<HotspotResult> {
    let classification = classify(scene, forest)?;
    let report = DetectionReport::new(
        scene.metadata(),
        PipelineKind::Hotspot,
        classification.count_class(WASTE) as u64,
        classification.valid_count() as u64,
    );
    Ok(HotspotResult {
        classification,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct BlockageResult {
    /// Classification restricted to the cleaned mask.
    pub classification: ClassRaster,
    /// Waste-or-water pixels before cleaning.
    pub binary: BinaryMask,
    /// `dilate(open(binary))`.
    pub cleaned: BinaryMask,
    pub report: DetectionReport,
}

pub fn run_blockage(scene: &Raster, forest: &Forest, kernel: Kernel) -> Result<BlockageResult> {
    let full = classify(scene, forest)?;
    let bits = full
        .class_ids()
        .iter()
        .map(|&c| c == WASTE || c == WATER)
        .collect();
    let binary = BinaryMask::from_bits(full.width(), full.height(), bits)?;
    let cleaned = dilate(&open(&binary, kernel), kernel);
    let classification = full.masked(&cleaned)?;
    let mut report = DetectionReport::new(
        scene.metadata(),
        PipelineKind::Blockage,
        classification.count_class(WASTE) as u64,
        full.valid_count() as u64,
    );
    report.kernel_size = Some(kernel.size());
    Ok(BlockageResult {
        classification,
        binary,
        cleaned,
        report,
    })
}

/// Runs `kind` and returns the output classification with its report.
pub fn run(
    kind: PipelineKind,
    scene: &Raster,
    forest: &Forest,
    kernel: Kernel,
) -> Result<(ClassRaster, DetectionReport)> {
    match kind {
        PipelineKind::Hotspot => run_hotspot(scene, forest).map(|r| (r.classification, r.report)),
        PipelineKind::Blockage => {
            run_blockage(scene, forest, kernel).map(|r| (r.classification, r.report))
        }
    }
}

/// Writes `report.json`, `classified/`, `overlay.png` and `heatmap.png`
/// into `out_dir`, replacing it atomically.
pub fn write_outputs(
    out_dir: &Path,
    template: &SceneMetadata,
    classification: &ClassRaster,
    report: &DetectionReport,
) -> Result<()> {
    let stage = StagedDir::new(out_dir)?;
    write_outputs_into(stage.path(), template, classification, report)?;
    stage.commit()?;
    Ok(())
}

pub(crate) fn write_outputs_into(
    dir: &Path,
    template: &SceneMetadata,
    classification: &ClassRaster,
    report: &DetectionReport,
) -> Result<()> {
    let report_path = dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
    save_scene(
        &classification.to_raster(template)?,
        dir.join(CLASSIFIED_DIR),
    )?;
    write_renders(dir, classification)
}

pub(crate) fn write_renders(dir: &Path, classification: &ClassRaster) -> Result<()> {
    let overlay = render_classification(classification)?.to_png()?;
    let heatmap = render_heatmap(classification).to_png()?;
    for (name, bytes) in [(OVERLAY_FILE, overlay), (HEATMAP_FILE, heatmap)] {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn meta(pixel_size_m: f64) -> SceneMetadata {
        SceneMetadata::new(
            "r",
            "sentinel2",
            Utc.with_ymd_and_hms(2019, 7, 2, 9, 0, 0).unwrap(),
            pixel_size_m,
            vec![crate::raster::BandLabel::Red],
            100,
            10,
        )
    }

    #[test]
    fn report_arithmetic() {
        let r = DetectionReport::new(&meta(10.0), PipelineKind::Hotspot, 100, 1000);
        assert_eq!(r.waste_area_m2, 10_000.0);
        assert_eq!(r.waste_fraction, 0.1);
        assert!(!r.quality_warning);

        let zero = DetectionReport::new(&meta(3.0), PipelineKind::Blockage, 0, 0);
        assert_eq!(zero.waste_area_m2, 0.0);
        assert_eq!(zero.waste_fraction, 0.0);
        assert!(zero.quality_warning);
    }

    #[test]
    fn report_json_fields_are_snake_case() {
        let r = DetectionReport::new(&meta(10.0), PipelineKind::Blockage, 1, 4);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in [
            "scene_id",
            "timestamp",
            "waste_pixels",
            "waste_area_m2",
            "total_valid_pixels",
            "waste_fraction",
            "pipeline",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["pipeline"], "blockage");
    }
}
