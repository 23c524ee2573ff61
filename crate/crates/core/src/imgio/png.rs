use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Decoder, Encoder, Transformations};

use super::{BinaryMask, RgbImage};
use crate::{Error, Result};

/// Decoded 8-bit raster: dimensions, channel count and interleaved samples.
struct Raster {
    width: usize,
    height: usize,
    color: ColorType,
    samples: Vec<u8>,
}

fn decode(bytes: &[u8]) -> Result<Raster> {
    let mut decoder = Decoder::new(Cursor::new(bytes));
    // Palette and sub-byte grayscale get expanded; the original depth is checked below.
    decoder.set_transformations(Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;

    let info = reader.info();
    let source_depth = info.bit_depth;
    if info.color_type != ColorType::Indexed && source_depth != BitDepth::Eight {
        return Err(Error::BitDepth(source_depth as u8));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::InvalidData(format!(
            "zero dimension {width}x{height}"
        )));
    }

    let (color, depth) = reader.output_color_type();
    if depth != BitDepth::Eight {
        return Err(Error::BitDepth(depth as u8));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    buf.truncate(frame.buffer_size());

    Ok(Raster {
        width,
        height,
        color,
        samples: buf,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Decode an 8-bit PNG (gray, gray+alpha, RGB, RGBA or palette) into RGB.
/// Gray is replicated into all three channels and alpha is dropped.
pub fn decode_png_image(bytes: &[u8]) -> Result<RgbImage> {
    let r = decode(bytes)?;
    let channels = r.color.samples();
    let data = r
        .samples
        .chunks_exact(channels)
        .map(|px| match r.color {
            ColorType::Grayscale | ColorType::GrayscaleAlpha => [px[0]; 3],
            _ => [px[0], px[1], px[2]],
        })
        .collect();
    RgbImage::new(r.width, r.height, data)
}

pub fn read_png_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_png_image(&read_file(path.as_ref())?)
}

/// Decode a mask PNG: a pixel is foreground iff any colour channel is >= 128.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let r = decode(bytes)?;
    let channels = r.color.samples();
    let colour_channels = match r.color {
        ColorType::Grayscale | ColorType::GrayscaleAlpha => 1,
        _ => 3,
    };
    let data = r
        .samples
        .chunks_exact(channels)
        .map(|px| px[..colour_channels].iter().any(|&v| v >= 128) as u8)
        .collect();
    BinaryMask::new(r.width, r.height, data)
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask_png(&read_file(path.as_ref())?)
}

fn encode(width: usize, height: usize, color: ColorType, samples: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer
            .write_image_data(samples)
            .map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Encode a mask as single-channel 8-bit PNG with foreground 255.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let samples: Vec<u8> = mask.labels().iter().map(|&v| v * 255).collect();
    encode(mask.width(), mask.height(), ColorType::Grayscale, &samples)
}

pub fn write_mask_png(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_mask_png(mask)?).map_err(|e| Error::io(path, e))
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>> {
    let samples: Vec<u8> = image.pixels().iter().flatten().copied().collect();
    encode(image.width(), image.height(), ColorType::Rgb, &samples)
}

pub fn write_rgb_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_rgb_png(image)?).map_err(|e| Error::io(path, e))
}
