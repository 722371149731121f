//! Class-map and confidence-heatmap renderers producing 8-bit RGBA PNGs.

use crate::classes::{ClassRaster, NODATA_CLASS, WASTE};
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

pub const RED: Rgb = [255, 0, 4];
pub const BLUE: Rgb = [18, 0, 222];
pub const GREEN: Rgb = [6, 205, 16];
pub const GRAY: Rgb = [170, 170, 170];
pub const BROWN: Rgb = [133, 100, 33];
pub const YELLOW: Rgb = [246, 221, 0];

/// Colors of waste, water, forest/meadow, buildings, bare ground, by class id.
pub const CLASS_PALETTE: [Rgb; 5] = [RED, BLUE, GREEN, GRAY, BROWN];

/// Lower confidence edge of each heatmap bin, highest first. Bins are closed
/// below and open above, except the top bin which also includes 1.0.
pub const HEATMAP_BINS: [(f32, Rgb); 3] = [(0.9, RED), (0.8, YELLOW), (0.7, GREEN)];

pub const TRANSPARENT: [u8; 4] = [0, 0, 0, 0];

pub fn heatmap_color(confidence: f32) -> Option<Rgb> {
    HEATMAP_BINS
        .iter()
        .find(|(lo, _)| confidence >= *lo)
        .map(|&(_, rgb)| rgb)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbaImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbaImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 4] {
        let i = 4 * (y * self.width + x);
        [
            self.data[i],
            self.data[i + 1],
            self.data[i + 2],
            self.data[i + 3],
        ]
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::Encode(e.to_string()))?;
            writer
                .write_image_data(&self.data)
                .map_err(|e| Error::Encode(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<RgbaImage> {
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::Encode(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Encode(e.to_string()))?;
        if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::Encode("expected 8-bit RGBA".into()));
        }
        buf.truncate(info.buffer_size());
        Ok(RgbaImage {
            width: info.width as usize,
            height: info.height as usize,
            data: buf,
        })
    }
}

fn render(
    cr: &ClassRaster,
    mut color: impl FnMut(u8, f32) -> Result<[u8; 4]>,
) -> Result<RgbaImage> {
    let mut data = Vec::with_capacity(cr.class_ids().len() * 4);
    for (&c, &p) in cr.class_ids().iter().zip(cr.confidence()) {
        data.extend_from_slice(&color(c, p)?);
    }
    Ok(RgbaImage {
        width: cr.width(),
        height: cr.height(),
        data,
    })
}

fn opaque([r, g, b]: Rgb) -> [u8; 4] {
    [r, g, b, 255]
}

/// Colors every pixel by class; nodata is transparent.
pub fn render_classification(cr: &ClassRaster) -> Result<RgbaImage> {
    render(cr, |c, _| match c {
        NODATA_CLASS => Ok(TRANSPARENT),
        c => CLASS_PALETTE
            .get(c as usize)
            .map(|&rgb| opaque(rgb))
            .ok_or(Error::Palette(c)),
    })
}

/// Colors waste pixels by confidence bin; everything else is transparent.
pub fn render_heatmap(cr: &ClassRaster) -> RgbaImage {
    render(cr, |c, p| {
        Ok(match (c, heatmap_color(p)) {
            (WASTE, Some(rgb)) => opaque(rgb),
            _ => TRANSPARENT,
        })
    })
    .expect("heatmap colors are total")
}
