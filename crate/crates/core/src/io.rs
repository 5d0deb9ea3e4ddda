//! Image and table I/O.
//!
//! Inputs: 8- or 16-bit PNG and PGM, grayscale or color. Color is reduced
//! to luminance with fixed Rec. 601 weights. Maps are written as 16-bit
//! grayscale PNG (`round(65535·v)`) and as CSV with LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::collinearity::CollinearityKernelSet;
use crate::error::{Error, Result};
use crate::field::{GrayImage, ScalarMap};
use crate::gabor::GaborBank;

/// Largest accepted input, in pixels.
pub const DEFAULT_MAX_PIXELS: u64 = 100_000_000;

const REC601: [f64; 3] = [0.299, 0.587, 0.114];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    read_image_limited(path, DEFAULT_MAX_PIXELS)
}

/// Reads an image as luminance in `[0, 1]`, rejecting inputs larger than
/// `max_pixels` before decoding.
pub fn read_image_limited(path: impl AsRef<Path>, max_pixels: u64) -> Result<GrayImage> {
    let path = path.as_ref();
    let open = || -> Result<ImageReader<std::io::BufReader<File>>> {
        ImageReader::open(path)
            .map_err(|e| io_err(path, e))?
            .with_guessed_format()
            .map_err(|e| io_err(path, e))
    };
    let (w, h) = open()?.into_dimensions().map_err(|e| image_err(path, e))?;
    if u64::from(w) * u64::from(h) > max_pixels {
        return Err(io_err(
            path,
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("image of {w}x{h} exceeds the limit of {max_pixels} pixels"),
            ),
        ));
    }
    let decoded = open()?.decode().map_err(|e| image_err(path, e))?;
    Ok(to_gray(&decoded))
}

/// Luminance of a decoded image. Gray inputs keep their exact sample
/// values; color inputs use Rec. 601 weights.
pub fn to_gray(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect(),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => img
            .to_rgb8()
            .pixels()
            .map(|p| luminance(p.0.map(|c| f64::from(c) / 255.0)))
            .collect(),
        _ => img
            .to_rgb16()
            .pixels()
            .map(|p| luminance(p.0.map(|c| f64::from(c) / 65535.0)))
            .collect(),
    };
    GrayImage::new(h, w, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()).expect("decoded samples lie in [0, 1]")
}

fn luminance(rgb: [f64; 3]) -> f64 {
    REC601[0] * rgb[0] + REC601[1] * rgb[1] + REC601[2] * rgb[2]
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes values clamped to `[0, 1]` as a 16-bit grayscale PNG.
pub fn write_png16(path: impl AsRef<Path>, height: usize, width: usize, data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
        width as u32,
        height as u32,
        data.iter().map(|v| quantize16(*v)).collect(),
    )
    .ok_or_else(|| Error::Shape(format!("{} values for {height}x{width}", data.len())))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn write_map_png(path: impl AsRef<Path>, map: &ScalarMap) -> Result<()> {
    write_png16(path, map.height(), map.width(), map.data())
}

pub fn write_image_png(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    write_png16(path, image.height(), image.width(), image.data())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes a row-major grid of numbers, one CSV row per grid row.
pub fn write_grid_csv<W: Write>(out: W, width: usize, data: &[f64]) -> Result<()> {
    let mut w = csv_writer(out);
    for row in data.chunks(width.max(1)) {
        w.write_record(row.iter().map(|v| format!("{v:.10e}")))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_map_csv(path: impl AsRef<Path>, map: &ScalarMap) -> Result<()> {
    write_grid_csv(create(path.as_ref())?, map.width(), map.data())
}

/// Dense collinearity kernel per orientation, `{prefix}_{index}.csv`.
pub fn write_collinearity_kernels(dir: impl AsRef<Path>, prefix: &str, kernels: &CollinearityKernelSet) -> Result<()> {
    for (i, k) in kernels.kernels().iter().enumerate() {
        let path = dir.as_ref().join(format!("{prefix}_{i}.csv"));
        write_grid_csv(create(&path)?, k.side(), k.dense())?;
    }
    Ok(())
}

pub fn write_gabor_kernels(dir: impl AsRef<Path>, prefix: &str, bank: &GaborBank) -> Result<()> {
    for (i, k) in bank.kernels().iter().enumerate() {
        let path = dir.as_ref().join(format!("{prefix}_{i}.csv"));
        write_grid_csv(create(&path)?, k.size(), k.data())?;
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| io_err(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Opens a buffered file for writing, attaching the path to errors.
pub fn create_file(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    create(path.as_ref())
}
