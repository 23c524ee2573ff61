//! Images, masks, probability maps, box lists and configuration, plus their
//! on-disk formats.

mod boxes;
mod config;
mod pfm;
mod png;

pub use boxes::{check_bounds, parse_boxes, read_boxes, render_boxes, write_boxes, BBox, BBoxList};
pub use config::{PipelineConfig, SolverKind};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use png::{
    decode_mask_png, decode_png_image, encode_mask_png, encode_rgb_png, read_mask_png,
    read_png_image, write_mask_png, write_rgb_png,
};

use crate::{Error, Result};

/// Slack allowed on probability values read from disk.
pub const PROB_SLACK: f32 = 1e-6;

/// Dense row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, px: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![px; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [u8; 3]) {
        self.data[y * self.width + x] = px;
    }

    /// Pixel intensities as real 3-vectors.
    pub fn color(&self, idx: usize) -> [f64; 3] {
        let [r, g, b] = self.data[idx];
        [r as f64, g as f64, b as f64]
    }
}

/// Dense row-major {0,1} label grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!(
                "mask label {} at index {pos} is not 0 or 1",
                data[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_dims(width, height, width * height)?;
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y) as u8)
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }
}

/// Dense row-major per-pixel foreground probabilities in [0,1].
///
/// Values are held at `f32`, the precision of the PFM container, so a map
/// written to disk and read back is bit-identical to the in-memory one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite probability at index {i}"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidData(format!(
                    "probability {v} at index {i} outside [0,1]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_f64(width: usize, height: usize, data: &[f64]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&v| v as f32).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

impl From<&BinaryMask> for ProbMap {
    fn from(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            data: mask.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidData(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidData(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}
