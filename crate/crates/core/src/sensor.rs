//! Band tables of the supported optical sensors.

use crate::raster::BandLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub id: &'static str,
    pub resolution_m: f64,
    /// Lower and upper edge in nm; both equal the central wavelength when only that is published.
    pub wavelength_nm: (u32, u32),
    pub description: &'static str,
}

impl BandSpec {
    /// The shared four-band label this band maps to, if any.
    pub fn label(&self) -> BandLabel {
        match self.description {
            "Blue" => BandLabel::Blue,
            "Green" => BandLabel::Green,
            "Red" => BandLabel::Red,
            "NIR" => BandLabel::Nir,
            _ => BandLabel::Other(self.id.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorProfile {
    pub name: &'static str,
    pub bands: &'static [BandSpec],
}

const fn band(
    id: &'static str,
    resolution_m: f64,
    lo: u32,
    hi: u32,
    description: &'static str,
) -> BandSpec {
    BandSpec {
        id,
        resolution_m,
        wavelength_nm: (lo, hi),
        description,
    }
}

const SENTINEL2_BANDS: [BandSpec; 13] = [
    band("B1", 60.0, 443, 443, "Coastal aerosol"),
    band("B2", 10.0, 490, 490, "Blue"),
    band("B3", 10.0, 560, 560, "Green"),
    band("B4", 10.0, 665, 665, "Red"),
    band("B5", 20.0, 705, 705, "Vegetation red edge"),
    band("B6", 20.0, 740, 740, "Vegetation red edge"),
    band("B7", 20.0, 783, 783, "Vegetation red edge"),
    band("B8", 10.0, 842, 842, "NIR"),
    band("B8a", 20.0, 865, 865, "Narrow NIR"),
    band("B9", 60.0, 940, 940, "Water vapour"),
    band("B10", 60.0, 1375, 1375, "SWIR - Cirrus"),
    band("B11", 20.0, 1610, 1610, "SWIR 1"),
    band("B12", 20.0, 2190, 2190, "SWIR 2"),
];

const PLANETSCOPE_BANDS: [BandSpec; 4] = [
    band("B1", 3.0, 455, 517, "Blue"),
    band("B2", 3.0, 500, 590, "Green"),
    band("B3", 3.0, 590, 682, "Red"),
    band("B4", 3.0, 780, 888, "NIR"),
];

pub const SENTINEL2: SensorProfile = SensorProfile {
    name: "sentinel2",
    bands: &SENTINEL2_BANDS,
};

pub const PLANETSCOPE: SensorProfile = SensorProfile {
    name: "planetscope",
    bands: &PLANETSCOPE_BANDS,
};

impl SensorProfile {
    pub fn by_name(name: &str) -> Option<SensorProfile> {
        match name.to_ascii_lowercase().as_str() {
            "sentinel2" | "sentinel-2" => Some(SENTINEL2),
            "planetscope" => Some(PLANETSCOPE),
            _ => None,
        }
    }

    /// Finest ground resolution among the four shared bands.
    pub fn shared_band_resolution_m(&self) -> f64 {
        self.bands
            .iter()
            .filter(|b| !matches!(b.label(), BandLabel::Other(_)))
            .map(|b| b.resolution_m)
            .fold(f64::INFINITY, f64::min)
    }

    /// Band labels in the sensor's native order.
    pub fn labels(&self) -> Vec<BandLabel> {
        self.bands.iter().map(BandSpec::label).collect()
    }
}
