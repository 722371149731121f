//! Spectral indices and the per-pixel feature stack fed to the classifier.
//!
//! | index | formula                        |
//! |-------|--------------------------------|
//! | PI    | NIR / (NIR + Red)              |
//! | NDWI  | (Green − NIR) / (Green + NIR)  |
//! | NDVI  | (NIR − Red) / (NIR + Red)      |
//! | RNDVI | (Red − NIR) / (Red + NIR)      |
//! | SR    | NIR / Red                      |
//!
//! A zero denominator, a nodata input or a non-finite result makes the
//! pixel invalid; invalid pixels hold NaN in the output plane.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::raster::{BandLabel, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Pi,
    Ndwi,
    Ndvi,
    Rndvi,
    Sr,
}

impl IndexKind {
    pub const ALL: [IndexKind; 5] = [
        IndexKind::Pi,
        IndexKind::Ndwi,
        IndexKind::Ndvi,
        IndexKind::Rndvi,
        IndexKind::Sr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Pi => "PI",
            IndexKind::Ndwi => "NDWI",
            IndexKind::Ndvi => "NDVI",
            IndexKind::Rndvi => "RNDVI",
            IndexKind::Sr => "SR",
        }
    }

    pub fn required_bands(self) -> [BandLabel; 2] {
        match self {
            IndexKind::Ndwi => [BandLabel::Green, BandLabel::Nir],
            _ => [BandLabel::Red, BandLabel::Nir],
        }
    }

    /// Evaluates the index for one pixel; `None` where it is undefined.
    pub fn evaluate(self, green: f32, red: f32, nir: f32) -> Option<f32> {
        let (g, r, n) = (green as f64, red as f64, nir as f64);
        let (num, den) = match self {
            IndexKind::Pi => (n, n + r),
            IndexKind::Ndwi => (g - n, g + n),
            IndexKind::Ndvi => (n - r, n + r),
            IndexKind::Rndvi => (r - n, r + n),
            IndexKind::Sr => (n, r),
        };
        if den == 0.0 {
            return None;
        }
        let v = (num / den) as f32;
        v.is_finite().then_some(v)
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Metadata(format!("unknown index `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct IndexPlane {
    pub kind: IndexKind,
    pub values: Vec<f32>,
    pub valid: BinaryMask,
}

pub fn compute_index(raster: &Raster, kind: IndexKind) -> Result<IndexPlane> {
    let [a, b] = kind.required_bands();
    let first = raster.band(&a)?;
    let nir = raster.band(&b)?;
    let meta = raster.metadata();
    let mut valid = Vec::with_capacity(nir.len());
    let values = first
        .iter()
        .zip(nir)
        .map(|(&v, &n)| {
            let out = if meta.is_nodata(v) || meta.is_nodata(n) {
                None
            } else if kind == IndexKind::Ndwi {
                kind.evaluate(v, 0.0, n)
            } else {
                kind.evaluate(0.0, v, n)
            };
            valid.push(out.is_some());
            out.unwrap_or(f32::NAN)
        })
        .collect();
    Ok(IndexPlane {
        kind,
        values,
        valid: BinaryMask::from_bits(raster.width(), raster.height(), valid)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// The four bands both sensors share, plus the five indices.
    #[default]
    CrossSensor,
    /// Cross-sensor features followed by every non-shared band as a raw feature.
    SentinelFull,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-sensor" => Ok(FeatureMode::CrossSensor),
            "sentinel-full" => Ok(FeatureMode::SentinelFull),
            _ => Err(Error::Metadata(format!("unknown feature mode `{s}`"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::CrossSensor => "cross-sensor",
            FeatureMode::SentinelFull => "sentinel-full",
        })
    }
}

pub const CROSS_SENSOR_FEATURES: [&str; 9] = [
    "Blue", "Green", "Red", "NIR", "PI", "NDWI", "NDVI", "RNDVI", "SR",
];

pub fn feature_names(raster: &Raster, mode: FeatureMode) -> Vec<String> {
    let mut names: Vec<String> = CROSS_SENSOR_FEATURES
        .iter()
        .map(|s| s.to_string())
        .collect();
    if mode == FeatureMode::SentinelFull {
        names.extend(
            raster
                .metadata()
                .band_labels
                .iter()
                .filter(|l| matches!(l, BandLabel::Other(_)))
                .map(|l| l.to_string()),
        );
    }
    names
}

/// Per-pixel feature planes plus the mask of pixels usable for classification.
#[derive(Debug, Clone)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    feature_names: Vec<String>,
    planes: Vec<Vec<f32>>,
    valid: BinaryMask,
}

impl FeatureStack {
    pub fn new(
        feature_names: Vec<String>,
        planes: Vec<Vec<f32>>,
        valid: BinaryMask,
    ) -> Result<Self> {
        let n = valid.width() * valid.height();
        if feature_names.len() != planes.len() || planes.iter().any(|p| p.len() != n) {
            return Err(Error::Shape(format!(
                "{} feature names, {} planes, {} pixels",
                feature_names.len(),
                planes.len(),
                n
            )));
        }
        Ok(FeatureStack {
            width: valid.width(),
            height: valid.height(),
            feature_names,
            planes,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[Vec<f32>] {
        &self.planes
    }

    pub fn plane(&self, name: &str) -> Option<&[f32]> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.planes[i].as_slice())
    }

    pub fn valid(&self) -> &BinaryMask {
        &self.valid
    }

    /// Copies the feature vector of pixel `index` (row-major) into `out`.
    pub fn pixel_into(&self, index: usize, out: &mut [f32]) {
        for (o, plane) in out.iter_mut().zip(&self.planes) {
            *o = plane[index];
        }
    }

    pub fn pixel(&self, index: usize) -> Vec<f32> {
        self.planes.iter().map(|p| p[index]).collect()
    }
}

pub fn compute_feature_stack(raster: &Raster, mode: FeatureMode) -> Result<FeatureStack> {
    let meta = raster.metadata();
    let blue = raster.band(&BandLabel::Blue)?;
    let green = raster.band(&BandLabel::Green)?;
    let red = raster.band(&BandLabel::Red)?;
    let nir = raster.band(&BandLabel::Nir)?;
    let n = meta.pixel_count();

    let mut index_planes = vec![vec![0f32; n]; IndexKind::ALL.len()];
    let mut valid = vec![true; n];
    {
        // Row-parallel evaluation over disjoint chunks of every output plane.
        let width = meta.width;
        let mut row_slices: Vec<Vec<&mut [f32]>> = (0..meta.height).map(|_| Vec::new()).collect();
        for plane in index_planes.iter_mut() {
            for (row, chunk) in plane.chunks_mut(width).enumerate() {
                row_slices[row].push(chunk);
            }
        }
        row_slices
            .into_par_iter()
            .zip(valid.par_chunks_mut(width))
            .enumerate()
            .for_each(|(row, (mut outs, ok))| {
                let base = row * width;
                for x in 0..width {
                    let i = base + x;
                    let (b, g, r, nv) = (blue[i], green[i], red[i], nir[i]);
                    let mut usable = !(meta.is_nodata(b)
                        || meta.is_nodata(g)
                        || meta.is_nodata(r)
                        || meta.is_nodata(nv));
                    for (k, kind) in IndexKind::ALL.into_iter().enumerate() {
                        let v = if usable {
                            kind.evaluate(g, r, nv)
                        } else {
                            None
                        };
                        usable &= v.is_some();
                        outs[k][x] = v.unwrap_or(f32::NAN);
                    }
                    ok[x] = usable;
                }
            });
    }

    let mut planes = vec![blue.to_vec(), green.to_vec(), red.to_vec(), nir.to_vec()];
    planes.extend(index_planes);

    if mode == FeatureMode::SentinelFull {
        for (b, label) in meta.band_labels.iter().enumerate() {
            if matches!(label, BandLabel::Other(_)) {
                let plane = raster.band_at(b);
                for (ok, &v) in valid.iter_mut().zip(plane) {
                    if meta.is_nodata(v) {
                        *ok = false;
                    }
                }
                planes.push(plane.to_vec());
            }
        }
    }

    FeatureStack::new(
        feature_names(raster, mode),
        planes,
        BinaryMask::from_bits(meta.width, meta.height, valid)?,
    )
}
