//! Land-cover classes and per-pixel classification results.

use crate::error::{Error, Result};
use crate::raster::{BandLabel, Raster, SceneMetadata};

pub const WASTE: u8 = 0;
pub const WATER: u8 = 1;
pub const FOREST_MEADOW: u8 = 2;
pub const BUILDINGS: u8 = 3;
pub const BARE_GROUND: u8 = 4;

/// Class id of pixels that were not classified.
pub const NODATA_CLASS: u8 = 255;

pub const CLASS_NAMES: [&str; 5] = [
    "waste",
    "water",
    "forest/meadow",
    "buildings",
    "bare ground",
];

pub fn default_class_names() -> Vec<String> {
    CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

pub const CLASS_ID_BAND: &str = "class_id";
pub const CONFIDENCE_BAND: &str = "confidence";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRaster {
    width: usize,
    height: usize,
    class_ids: Vec<u8>,
    confidence: Vec<f32>,
    class_names: Vec<String>,
}

impl ClassRaster {
    pub fn new(
        width: usize,
        height: usize,
        class_ids: Vec<u8>,
        confidence: Vec<f32>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = width * height;
        if class_ids.len() != n || confidence.len() != n {
            return Err(Error::Shape(format!(
                "{} class ids and {} confidences for {width}x{height} pixels",
                class_ids.len(),
                confidence.len()
            )));
        }
        for (i, (&c, &p)) in class_ids.iter().zip(&confidence).enumerate() {
            if c == NODATA_CLASS {
                if p != 0.0 {
                    return Err(Error::Shape(format!("nodata pixel {i} has confidence {p}")));
                }
            } else if (c as usize) >= class_names.len() {
                return Err(Error::Shape(format!(
                    "pixel {i} has class {c} but only {} classes exist",
                    class_names.len()
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Shape(format!(
                    "pixel {i} confidence {p} outside [0,1]"
                )));
            }
        }
        Ok(ClassRaster {
            width,
            height,
            class_ids,
            confidence,
            class_names,
        })
    }

    pub fn all_nodata(width: usize, height: usize, class_names: Vec<String>) -> Self {
        ClassRaster {
            width,
            height,
            class_ids: vec![NODATA_CLASS; width * height],
            confidence: vec![0.0; width * height],
            class_names,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_ids(&self) -> &[u8] {
        &self.class_ids
    }

    pub fn confidence(&self) -> &[f32] {
        &self.confidence
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_at(&self, y: usize, x: usize) -> u8 {
        self.class_ids[y * self.width + x]
    }

    pub fn count_class(&self, class: u8) -> usize {
        self.class_ids.iter().filter(|&&c| c == class).count()
    }

    pub fn valid_count(&self) -> usize {
        self.class_ids
            .iter()
            .filter(|&&c| c != NODATA_CLASS)
            .count()
    }

    /// Copy with every pixel outside `keep` turned to nodata.
    pub fn masked(&self, keep: &crate::mask::BinaryMask) -> Result<ClassRaster> {
        if keep.width() != self.width || keep.height() != self.height {
            return Err(Error::Shape("mask and class raster differ in size".into()));
        }
        let mut out = self.clone();
        for (i, &k) in keep.bits().iter().enumerate() {
            if !k {
                out.class_ids[i] = NODATA_CLASS;
                out.confidence[i] = 0.0;
            }
        }
        Ok(out)
    }

    /// Two-band scene (class id, confidence) on the grid of `template`.
    /// Nodata pixels hold NaN class ids.
    pub fn to_raster(&self, template: &SceneMetadata) -> Result<Raster> {
        let mut metadata = template.clone();
        if metadata.width != self.width || metadata.height != self.height {
            return Err(Error::Shape(
                "template grid differs from class raster".into(),
            ));
        }
        metadata.band_labels = vec![
            BandLabel::Other(CLASS_ID_BAND.into()),
            BandLabel::Other(CONFIDENCE_BAND.into()),
        ];
        metadata.nodata = f32::NAN;
        let ids = self
            .class_ids
            .iter()
            .map(|&c| {
                if c == NODATA_CLASS {
                    f32::NAN
                } else {
                    c as f32
                }
            })
            .collect();
        Raster::from_planes(metadata, vec![ids, self.confidence.clone()])
    }

    /// Inverse of [`ClassRaster::to_raster`]. A missing confidence band reads as 1.
    pub fn from_raster(raster: &Raster, class_names: Vec<String>) -> Result<ClassRaster> {
        let ids = raster.band(&BandLabel::Other(CLASS_ID_BAND.into()))?;
        let conf = raster.band(&BandLabel::Other(CONFIDENCE_BAND.into())).ok();
        let meta = raster.metadata();
        let mut class_ids = Vec::with_capacity(ids.len());
        let mut confidence = Vec::with_capacity(ids.len());
        for (i, &v) in ids.iter().enumerate() {
            if meta.is_nodata(v) {
                class_ids.push(NODATA_CLASS);
                confidence.push(0.0);
                continue;
            }
            if v.fract() != 0.0 || v < 0.0 || v >= NODATA_CLASS as f32 {
                return Err(Error::Shape(format!("pixel {i} holds non-class value {v}")));
            }
            class_ids.push(v as u8);
            confidence.push(conf.map_or(1.0, |c| c[i]));
        }
        ClassRaster::new(
            raster.width(),
            raster.height(),
            class_ids,
            confidence,
            class_names,
        )
    }
}
