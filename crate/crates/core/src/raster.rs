//! Multiband scene rasters and the portable on-disk scene format.
//!
//! A scene directory holds two files:
//!
//! * `scene.json` with the acquisition metadata,
//! * `bands.bin` with raw little-endian `f32` samples in band-sequential,
//!   row-major order and no header.
//!
//! Samples are stored exactly as given: NaN payloads and nodata sentinels
//! survive a save/load cycle bit for bit.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const METADATA_FILE: &str = "scene.json";
pub const PAYLOAD_FILE: &str = "bands.bin";

/// Spectral band identity. The four bands shared by every supported sensor
/// are named; everything else is carried as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BandLabel {
    Blue,
    Green,
    Red,
    Nir,
    Other(String),
}

impl BandLabel {
    pub fn other(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        match name.parse::<BandLabel>()? {
            BandLabel::Other(n) => Ok(BandLabel::Other(n)),
            named => Err(Error::Metadata(format!(
                "`{name}` names the {named} band and cannot be used as a custom label"
            ))),
        }
    }

    /// Name as written to `scene.json`.
    pub fn file_name(&self) -> &str {
        match self {
            BandLabel::Blue => "blue",
            BandLabel::Green => "green",
            BandLabel::Red => "red",
            BandLabel::Nir => "nir",
            BandLabel::Other(name) => name,
        }
    }
}

impl fmt::Display for BandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandLabel::Blue => f.write_str("Blue"),
            BandLabel::Green => f.write_str("Green"),
            BandLabel::Red => f.write_str("Red"),
            BandLabel::Nir => f.write_str("NIR"),
            BandLabel::Other(name) => f.write_str(name),
        }
    }
}

impl FromStr for BandLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Metadata("empty band label".into()));
        }
        Ok(match s.to_ascii_lowercase().as_str() {
            "blue" => BandLabel::Blue,
            "green" => BandLabel::Green,
            "red" => BandLabel::Red,
            "nir" => BandLabel::Nir,
            _ => BandLabel::Other(s.to_string()),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SceneMetadata {
    pub scene_id: String,
    pub sensor: String,
    pub acquired_at: DateTime<Utc>,
    /// Ground length of one pixel side, in meters.
    pub pixel_size_m: f64,
    pub band_labels: Vec<BandLabel>,
    pub nodata: f32,
    pub width: usize,
    pub height: usize,
    /// Opaque geo-referencing string, carried but never interpreted.
    pub geo: Option<String>,
}

// NaN nodata compares equal to NaN nodata.
impl PartialEq for SceneMetadata {
    fn eq(&self, other: &Self) -> bool {
        self.scene_id == other.scene_id
            && self.sensor == other.sensor
            && self.acquired_at == other.acquired_at
            && self.pixel_size_m == other.pixel_size_m
            && self.band_labels == other.band_labels
            && (self.nodata == other.nodata || (self.nodata.is_nan() && other.nodata.is_nan()))
            && self.width == other.width
            && self.height == other.height
            && self.geo == other.geo
    }
}

impl SceneMetadata {
    pub fn new(
        scene_id: impl Into<String>,
        sensor: impl Into<String>,
        acquired_at: DateTime<Utc>,
        pixel_size_m: f64,
        band_labels: Vec<BandLabel>,
        width: usize,
        height: usize,
    ) -> Self {
        SceneMetadata {
            scene_id: scene_id.into(),
            sensor: sensor.into(),
            acquired_at,
            pixel_size_m,
            band_labels,
            nodata: f32::NAN,
            width,
            height,
            geo: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Metadata(format!(
                "width and height must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.pixel_size_m > 0.0 && self.pixel_size_m.is_finite()) {
            return Err(Error::Metadata(format!(
                "pixel_size_m must be positive, got {}",
                self.pixel_size_m
            )));
        }
        if self.band_labels.is_empty() {
            return Err(Error::Metadata("scene has no bands".into()));
        }
        let mut seen = HashSet::new();
        for label in &self.band_labels {
            if let BandLabel::Other(name) = label {
                if name.is_empty() {
                    return Err(Error::Metadata("empty band label".into()));
                }
                if !matches!(name.parse::<BandLabel>()?, BandLabel::Other(_)) {
                    return Err(Error::Metadata(format!(
                        "custom band label `{name}` collides with a named band"
                    )));
                }
            }
            if !seen.insert(label.clone()) {
                return Err(Error::DuplicateBand(label.to_string()));
            }
        }
        if self.nodata.is_infinite() {
            return Err(Error::Metadata("nodata must be finite or NaN".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn sample_count(&self) -> usize {
        self.pixel_count() * self.band_labels.len()
    }

    pub fn band_index(&self, label: &BandLabel) -> Option<usize> {
        self.band_labels.iter().position(|l| l == label)
    }

    /// True when `value` marks a missing measurement under this scene's sentinel.
    pub fn is_nodata(&self, value: f32) -> bool {
        if self.nodata.is_nan() {
            value.is_nan()
        } else {
            value == self.nodata || value.is_nan()
        }
    }
}

/// Area on the ground covered by one pixel, in square meters.
pub fn pixel_area_m2(metadata: &SceneMetadata) -> f64 {
    metadata.pixel_size_m * metadata.pixel_size_m
}

/// An immutable multiband raster.
#[derive(Debug, Clone)]
pub struct Raster {
    metadata: SceneMetadata,
    samples: Vec<f32>,
}

impl Raster {
    pub fn new(metadata: SceneMetadata, samples: Vec<f32>) -> Result<Self> {
        metadata.validate()?;
        if samples.len() != metadata.sample_count() {
            return Err(Error::SizeMismatch {
                expected: metadata.sample_count(),
                actual: samples.len(),
            });
        }
        let nodata_is_nan = metadata.nodata.is_nan();
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| {
            !(v.is_finite() || (nodata_is_nan && v.is_nan()) || **v == metadata.nodata)
        }) {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Raster { metadata, samples })
    }

    /// Builds a raster from one plane per band, in the order of `metadata.band_labels`.
    pub fn from_planes(metadata: SceneMetadata, planes: Vec<Vec<f32>>) -> Result<Self> {
        if planes.len() != metadata.band_labels.len() {
            return Err(Error::Shape(format!(
                "{} planes for {} band labels",
                planes.len(),
                metadata.band_labels.len()
            )));
        }
        let samples = planes.concat();
        Raster::new(metadata, samples)
    }

    pub fn metadata(&self) -> &SceneMetadata {
        &self.metadata
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn width(&self) -> usize {
        self.metadata.width
    }

    pub fn height(&self) -> usize {
        self.metadata.height
    }

    pub fn band_count(&self) -> usize {
        self.metadata.band_labels.len()
    }

    /// Plane `index` in band order.
    pub fn band_at(&self, index: usize) -> &[f32] {
        let n = self.metadata.pixel_count();
        &self.samples[index * n..(index + 1) * n]
    }

    pub fn band(&self, label: &BandLabel) -> Result<&[f32]> {
        self.metadata
            .band_index(label)
            .map(|i| self.band_at(i))
            .ok_or_else(|| Error::UnknownBand(label.to_string()))
    }

    pub fn sample(&self, band: usize, y: usize, x: usize) -> f32 {
        let w = self.metadata.width;
        self.samples[band * self.metadata.pixel_count() + y * w + x]
    }

    /// Pixels where every band carries a measurement.
    pub fn valid_mask(&self) -> BinaryMask {
        let n = self.metadata.pixel_count();
        let mut bits = vec![true; n];
        for b in 0..self.band_count() {
            for (bit, &v) in bits.iter_mut().zip(self.band_at(b)) {
                if self.metadata.is_nodata(v) {
                    *bit = false;
                }
            }
        }
        BinaryMask::from_bits(self.metadata.width, self.metadata.height, bits)
            .expect("bit count matches raster size")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodataField {
    Number(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    scene_id: String,
    sensor: String,
    acquired_at: String,
    pixel_size_m: f64,
    width: usize,
    height: usize,
    nodata: NodataField,
    bands: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geo: Option<String>,
}

impl SceneFile {
    fn from_metadata(m: &SceneMetadata) -> Self {
        SceneFile {
            scene_id: m.scene_id.clone(),
            sensor: m.sensor.clone(),
            acquired_at: m.acquired_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            pixel_size_m: m.pixel_size_m,
            width: m.width,
            height: m.height,
            nodata: if m.nodata.is_nan() {
                NodataField::Text("nan".into())
            } else {
                NodataField::Number(m.nodata as f64)
            },
            bands: m
                .band_labels
                .iter()
                .map(|b| b.file_name().to_string())
                .collect(),
            geo: m.geo.clone(),
        }
    }

    fn into_metadata(self) -> Result<SceneMetadata> {
        let acquired_at = DateTime::parse_from_rfc3339(&self.acquired_at)
            .map_err(|e| Error::Metadata(format!("acquired_at `{}`: {e}", self.acquired_at)))?
            .with_timezone(&Utc);
        let nodata = match self.nodata {
            NodataField::Number(v) => v as f32,
            NodataField::Text(t) if t.eq_ignore_ascii_case("nan") => f32::NAN,
            NodataField::Text(t) => {
                return Err(Error::Metadata(format!(
                    "nodata `{t}` is neither a number nor \"nan\""
                )))
            }
        };
        let band_labels = self
            .bands
            .iter()
            .map(|b| b.parse())
            .collect::<Result<Vec<BandLabel>>>()?;
        let metadata = SceneMetadata {
            scene_id: self.scene_id,
            sensor: self.sensor,
            acquired_at,
            pixel_size_m: self.pixel_size_m,
            band_labels,
            nodata,
            width: self.width,
            height: self.height,
            geo: self.geo,
        };
        metadata.validate()?;
        Ok(metadata)
    }
}

/// Reads only `scene.json` from a scene directory.
pub fn load_metadata(directory: impl AsRef<Path>) -> Result<SceneMetadata> {
    let path = directory.as_ref().join(METADATA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    file.into_metadata()
}

pub fn load_scene(directory: impl AsRef<Path>) -> Result<Raster> {
    let directory = directory.as_ref();
    let metadata = load_metadata(directory)?;
    let path = directory.join(PAYLOAD_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::SizeMismatch {
            expected: metadata.sample_count(),
            actual: bytes.len() / 4,
        });
    }
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Raster::new(metadata, samples)
}

/// Writes a scene directory. Files are staged under temporary names and
/// renamed into place, so a failed save leaves no partial scene behind.
pub fn save_scene(raster: &Raster, directory: impl AsRef<Path>) -> Result<()> {
    let directory = directory.as_ref();
    fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;

    let json = serde_json::to_string_pretty(&SceneFile::from_metadata(&raster.metadata))
        .expect("scene metadata serializes");
    let mut payload = Vec::with_capacity(raster.samples.len() * 4);
    for v in &raster.samples {
        payload.extend_from_slice(&v.to_le_bytes());
    }

    let staged = [
        (
            directory.join(".scene.json.partial"),
            directory.join(METADATA_FILE),
            json.into_bytes(),
        ),
        (
            directory.join(".bands.bin.partial"),
            directory.join(PAYLOAD_FILE),
            payload,
        ),
    ];
    let written: Result<()> = staged
        .iter()
        .try_for_each(|(tmp, _, bytes)| write_file(tmp, bytes));
    if let Err(e) = written {
        for (tmp, _, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    for (tmp, dst, _) in &staged {
        fs::rename(tmp, dst).map_err(|e| Error::io(dst, e))?;
    }
    Ok(())
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn meta(w: usize, h: usize, bands: Vec<BandLabel>) -> SceneMetadata {
        SceneMetadata::new(
            "s1",
            "planetscope",
            Utc.with_ymd_and_hms(2021, 7, 2, 9, 30, 0).unwrap(),
            3.0,
            bands,
            w,
            h,
        )
    }

    #[test]
    fn loads_two_by_two_single_band() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::new(meta(2, 2, vec![BandLabel::Red]), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        save_scene(&r, dir.path()).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.width(), 2);
        assert_eq!(back.height(), 2);
        assert_eq!(back.samples(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn short_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::new(meta(2, 2, vec![BandLabel::Red]), vec![0.0; 4]).unwrap();
        save_scene(&r, dir.path()).unwrap();
        let payload: Vec<u8> = [1.0f32, 2.0, 3.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(dir.path().join(PAYLOAD_FILE), payload).unwrap();
        assert!(matches!(
            load_scene(dir.path()),
            Err(Error::SizeMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn band_order_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let bands = vec![
            BandLabel::Blue,
            BandLabel::Green,
            BandLabel::Red,
            BandLabel::Nir,
        ];
        let r = Raster::new(meta(1, 1, bands.clone()), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        save_scene(&r, dir.path()).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.metadata().band_labels, bands);
        assert_eq!(back.metadata().pixel_size_m, 3.0);
        assert_eq!(back.metadata(), r.metadata());
    }

    #[test]
    fn nan_payload_bits_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let odd_nan = f32::from_bits(0x7fc0_1234);
        let r = Raster::new(meta(2, 1, vec![BandLabel::Nir]), vec![odd_nan, 0.5]).unwrap();
        save_scene(&r, dir.path()).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.samples()[0].to_bits(), 0x7fc0_1234);
        assert!(!back.valid_mask().get(0, 0) && back.valid_mask().get(0, 1));
    }

    #[test]
    fn save_into_unwritable_target_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        // A regular file where the directory should go.
        let blocker = dir.path().join("blocker");
        fs::write(&blocker, b"x").unwrap();
        let r = Raster::new(meta(1, 1, vec![BandLabel::Red]), vec![1.0]).unwrap();
        assert!(matches!(
            save_scene(&r, blocker.join("scene")),
            Err(Error::Io { .. })
        ));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[cfg(unix)]
    #[test]
    fn save_into_read_only_directory_leaves_nothing() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("locked");
        fs::create_dir(&target).unwrap();
        fs::set_permissions(&target, fs::Permissions::from_mode(0o000)).unwrap();
        // Privileged users bypass mode bits; nothing to check then.
        let probe = target.join("probe");
        if fs::write(&probe, b"").is_ok() {
            fs::remove_file(&probe).unwrap();
            return;
        }
        let r = Raster::new(meta(1, 1, vec![BandLabel::Red]), vec![1.0]).unwrap();
        assert!(matches!(save_scene(&r, &target), Err(Error::Io { .. })));
        fs::set_permissions(&target, fs::Permissions::from_mode(0o755)).unwrap();
        assert_eq!(fs::read_dir(&target).unwrap().count(), 0);
    }

    #[test]
    fn band_lookup() {
        let bands = vec![
            BandLabel::Blue,
            BandLabel::Green,
            BandLabel::Red,
            BandLabel::Nir,
        ];
        let r = Raster::new(meta(1, 2, bands), vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        assert_eq!(r.band(&BandLabel::Nir).unwrap(), &[7.0, 8.0]);
        assert_eq!(
            r.band(&BandLabel::Blue).unwrap(),
            r.band(&BandLabel::Blue).unwrap()
        );
        let swir = BandLabel::other("SWIR1").unwrap();
        assert!(matches!(r.band(&swir), Err(Error::UnknownBand(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let m = meta(1, 1, vec![BandLabel::Red, BandLabel::Red]);
        assert!(matches!(m.validate(), Err(Error::DuplicateBand(_))));
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(METADATA_FILE),
            r#"{"scene_id":"a","sensor":"custom","acquired_at":"2020-01-01T00:00:00Z",
               "pixel_size_m":10,"width":1,"height":1,"nodata":"nan","bands":["Red","red"]}"#,
        )
        .unwrap();
        fs::write(dir.path().join(PAYLOAD_FILE), [0u8; 8]).unwrap();
        assert!(matches!(
            load_scene(dir.path()),
            Err(Error::DuplicateBand(_))
        ));
    }

    #[test]
    fn missing_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_scene(dir.path()), Err(Error::Io { .. })));
        fs::write(dir.path().join(METADATA_FILE), "{not json").unwrap();
        assert!(matches!(load_scene(dir.path()), Err(Error::Json { .. })));
    }

    #[test]
    fn finite_nodata_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = meta(2, 1, vec![BandLabel::Red]);
        m.nodata = -9999.0;
        let r = Raster::new(m, vec![-9999.0, 0.3]).unwrap();
        save_scene(&r, dir.path()).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.metadata().nodata, -9999.0);
        assert_eq!(back.valid_mask().bits(), &[false, true]);
    }

    #[test]
    fn rejects_infinite_samples() {
        let r = Raster::new(meta(1, 1, vec![BandLabel::Red]), vec![f32::INFINITY]);
        assert!(matches!(r, Err(Error::InvalidSample { index: 0, .. })));
    }

    #[test]
    fn custom_label_cannot_shadow_named_band() {
        assert!(BandLabel::other("NIR").is_err());
        assert_eq!("Nir".parse::<BandLabel>().unwrap(), BandLabel::Nir);
        assert_eq!(
            "B11".parse::<BandLabel>().unwrap(),
            BandLabel::Other("B11".into())
        );
    }

    #[test]
    fn pixel_areas() {
        let mut m = meta(1, 1, vec![BandLabel::Red]);
        for (side, area) in [(10.0, 100.0), (20.0, 400.0), (3.0, 9.0), (1.0, 1.0)] {
            m.pixel_size_m = side;
            assert_eq!(pixel_area_m2(&m), area);
        }
    }
}
