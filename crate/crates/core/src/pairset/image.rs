use std::path::Path;

use image::{DynamicImage, ImageError};

use crate::error::{DecodeFailure, Error, Result};

/// An 8-bit raster with its luma plane precomputed.
///
/// Samples are row-major and interleaved. Color images carry the luma
/// transform `0.299 R + 0.587 G + 0.114 B`; grayscale luma is the sample
/// value itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
    luma: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "{channels} channels, expected 1 or 3"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "{} samples for {width}x{height}x{channels}",
                data.len()
            )));
        }
        let luma = if channels == 1 {
            data.iter().map(|&v| f64::from(v)).collect()
        } else {
            data.chunks_exact(3)
                .map(|px| {
                    0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2])
                })
                .collect()
        };
        Ok(Image {
            width,
            height,
            channels,
            data,
            luma,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn luma(&self) -> &[f64] {
        &self.luma
    }

    pub(crate) fn check_same_size(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::SizeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            });
        }
        Ok(())
    }
}

/// Decodes a PNG or binary PPM/PGM file.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

fn decode(path: &Path, bytes: &[u8]) -> Result<Image> {
    let fail = |kind, message: String| Error::ImageDecode {
        path: path.to_path_buf(),
        kind,
        message,
    };
    if bytes.is_empty() {
        return Err(fail(DecodeFailure::Truncated, "empty file".into()));
    }
    let format = image::guess_format(bytes)
        .map_err(|e| fail(DecodeFailure::Unsupported, e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Pnm) {
        return Err(fail(DecodeFailure::Unsupported, format!("{format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        ImageError::Unsupported(u) => fail(DecodeFailure::Unsupported, u.to_string()),
        ImageError::Limits(l) => fail(DecodeFailure::ZeroDimension, l.to_string()),
        other => fail(DecodeFailure::Truncated, other.to_string()),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(fail(
            DecodeFailure::ZeroDimension,
            format!("{width}x{height}"),
        ));
    }
    let (channels, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            (1, decoded.to_luma8().into_raw())
        }
        other => (3, other.to_rgb8().into_raw()),
    };
    Image::new(width, height, channels, data)
}
