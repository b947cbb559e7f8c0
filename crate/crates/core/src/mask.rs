//! Raster types and file I/O for label masks and images.
//!
//! Masks are stored as 8-bit single-channel PNGs where the pixel value is
//! the class id and [`IGNORE`] marks void pixels. Images are normalized to
//! `[0, 1]` on load.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value that is never voted for or scored.
pub const IGNORE: u8 = 255;

/// Largest usable class count (ids `0..=254`).
pub const MAX_CLASSES: usize = IGNORE as usize;

/// Per-pixel class ids in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMask {
    width: u32,
    height: u32,
    num_classes: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "zero-size mask {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(Error::InvalidMask(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        if num_classes == 0 || num_classes > MAX_CLASSES {
            return Err(Error::InvalidMask(format!(
                "num_classes must be in 1..={MAX_CLASSES}, got {num_classes}"
            )));
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&l| l != IGNORE && l as usize >= num_classes)
        {
            return Err(Error::ClassOutOfRange {
                label: bad,
                num_classes,
            });
        }
        Ok(Self {
            width,
            height,
            num_classes,
            labels,
        })
    }

    /// Builds a mask whose class count is inferred from its labels.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        let k = infer_num_classes(&labels);
        Self::new(width, height, labels, k)
    }

    /// Mask filled with a single label.
    pub fn filled(width: u32, height: u32, label: u8, num_classes: usize) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![label; width as usize * height as usize],
            num_classes,
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Same labels under a different class count.
    pub fn with_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::new(self.width, self.height, self.labels, num_classes)
    }

    /// Count of pixels that are not [`IGNORE`].
    pub fn valid_pixels(&self) -> usize {
        self.labels.iter().filter(|&&l| l != IGNORE).count()
    }

    pub(crate) fn check_same_dims(&self, other: &LabelMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// `(largest non-ignore label) + 1`, or 1 when every pixel is ignore.
pub fn infer_num_classes(labels: &[u8]) -> usize {
    labels
        .iter()
        .filter(|&&l| l != IGNORE)
        .max()
        .map_or(1, |&m| m as usize + 1)
}

/// Normalized floating-point raster, channel-interleaved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    samples: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-size image {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if samples.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height}x{channels} image",
                samples.len()
            )));
        }
        if let Some(bad) = samples
            .iter()
            .find(|s| !s.is_finite() || **s < 0.0 || **s > 1.0)
        {
            return Err(Error::InvalidImage(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: f64) -> Result<Self> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Samples of pixel `index` (row-major).
    pub fn pixel(&self, index: usize) -> &[f64] {
        let c = self.channels as usize;
        &self.samples[index * c..(index + 1) * c]
    }

    /// Builds an image from raw samples, clamping into `[0, 1]`.
    /// Non-finite samples are rejected.
    pub(crate) fn from_clamped(
        width: u32,
        height: u32,
        channels: u8,
        mut samples: Vec<f64>,
    ) -> Result<Self> {
        for s in &mut samples {
            *s = s.clamp(0.0, 1.0);
        }
        Self::new(width, height, channels, samples)
    }
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    load_mask_with_classes(path, None)
}

/// Loads a mask, using `num_classes` when given instead of inferring it.
pub fn load_mask_with_classes(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
) -> Result<LabelMask> {
    let path = path.as_ref();
    let img = decode(path)?;
    match img.color() {
        ColorType::L8 => {}
        ColorType::L16 => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: "mask must be 8-bit".into(),
            })
        }
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("mask must be single-channel (found {other:?})"),
            })
        }
    }
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    let labels = gray.into_raw();
    let k = num_classes.unwrap_or_else(|| infer_num_classes(&labels));
    LabelMask::new(w, h, labels, k)
}

pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let gray = image::GrayImage::from_raw(mask.width, mask.height, mask.labels.clone())
        .expect("mask buffer length is an invariant");
    gray.save_with_format(path, ImageFormat::Png)
        .map_err(|e| encode_error(path, e))
}

/// Loads an 8/16-bit PNG or PNM (P5/P6) with 1 or 3 channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width(), img.height());
    let (channels, samples): (u8, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, normalize_u8(b.into_raw())),
        DynamicImage::ImageRgb8(b) => (3, normalize_u8(b.into_raw())),
        DynamicImage::ImageLuma16(b) => (1, normalize_u16(b.into_raw())),
        DynamicImage::ImageRgb16(b) => (3, normalize_u16(b.into_raw())),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("images must be 1 or 3 channel (found {:?})", other.color()),
            })
        }
    };
    ImageBuffer::new(w, h, channels, samples)
}

/// Output precision for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

/// Writes an image as PNG, quantizing each sample to the nearest code.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = img.dims();
    let dynamic = match (depth, img.channels) {
        (BitDepth::Eight, 1) => {
            DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, quantize_u8(img)).unwrap())
        }
        (BitDepth::Eight, _) => {
            DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, quantize_u8(img)).unwrap())
        }
        (BitDepth::Sixteen, 1) => DynamicImage::ImageLuma16(
            image::ImageBuffer::from_raw(w, h, quantize_u16(img)).unwrap(),
        ),
        (BitDepth::Sixteen, _) => {
            DynamicImage::ImageRgb16(image::ImageBuffer::from_raw(w, h, quantize_u16(img)).unwrap())
        }
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| encode_error(path, e))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("expected PNG or PNM, found {other:?}"),
            })
        }
    }
    let img = reader.decode().map_err(|source| Error::Decode {
        path: path.into(),
        source,
    })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: "zero-size image".into(),
        });
    }
    Ok(img)
}

fn encode_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        source => Error::Decode {
            path: path.into(),
            source,
        },
    }
}

fn normalize_u8(raw: Vec<u8>) -> Vec<f64> {
    raw.into_iter().map(|v| f64::from(v) / 255.0).collect()
}

fn normalize_u16(raw: Vec<u16>) -> Vec<f64> {
    raw.into_iter().map(|v| f64::from(v) / 65535.0).collect()
}

fn quantize_u8(img: &ImageBuffer) -> Vec<u8> {
    img.samples
        .iter()
        .map(|s| (s * 255.0).round() as u8)
        .collect()
}

fn quantize_u16(img: &ImageBuffer) -> Vec<u16> {
    img.samples
        .iter()
        .map(|s| (s * 65535.0).round() as u16)
        .collect()
}
