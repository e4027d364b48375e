//! Extracellular-matrix density rasters.

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

static DEFAULT_RASTER: &[u8] = include_bytes!("../../assets/ecm_bumps.pgm");

/// Parameters the shipped default raster was generated with.
pub const DEFAULT_SIZE: u32 = 64;
pub const DEFAULT_BUMPS: usize = 14;
pub const DEFAULT_SEED: u64 = 20;

/// Grayscale samples in `[0, 1]` covering the unit square, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmRaster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl EcmRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Raster(format!(
                "{} samples for a {width} x {height} raster",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Raster(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Decodes a PGM image, mapping black to 0 and white to 1.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
            .map_err(|e| Error::Raster(e.to_string()))?
            .to_luma16();
        let (w, h) = img.dimensions();
        let values = img.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
        Self::new(w as usize, h as usize, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes).map_err(|e| Error::Raster(format!("{}: {e}", path.display())))
    }

    /// The raster shipped with the library.
    pub fn default_raster() -> Self {
        Self::from_pgm(DEFAULT_RASTER).expect("embedded raster is valid")
    }

    /// `0.5` plus a sum of Gaussian bumps of random sign, clamped to `[0, 1]`
    /// and quantized to 8 bits.
    pub fn smooth_bumps(size: u32, bumps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<[f64; 4]> = (0..bumps)
            .map(|_| {
                [
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.05..0.15),
                    rng.gen_range(-0.4..0.4),
                ]
            })
            .collect();
        let n = size as usize;
        let values = (0..n * n)
            .map(|p| {
                let x = ((p % n) as f64 + 0.5) / n as f64;
                let y = 1.0 - ((p / n) as f64 + 0.5) / n as f64;
                let v: f64 = 0.5
                    + params
                        .iter()
                        .map(|[cx, cy, s, a]| {
                            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                            a * (-r2 / (2.0 * s * s)).exp()
                        })
                        .sum::<f64>();
                (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
            })
            .collect();
        Self::new(n, n, values).expect("clamped samples")
    }

    /// Binary 8-bit PGM encoding.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        let bytes = self.values.iter().map(|v| (v * 255.0).round() as u8).collect();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .ok_or_else(|| Error::Raster("raster shape".into()))?;
        let mut out = Vec::new();
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&img, img.width(), img.height(), ExtendedColorType::L8)
            .map_err(|e| Error::Raster(e.to_string()))?;
        Ok(out)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Bilinear interpolation between pixel centers at a point of the unit
    /// square; constant beyond the outermost centers.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = (x * self.width as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = ((1.0 - y) * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
        let at = |c: usize, r: usize| self.values[r * self.width + c];
        let top = at(c0, r0) * (1.0 - tx) + at(c1, r0) * tx;
        let bottom = at(c0, r1) * (1.0 - tx) + at(c1, r1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}
