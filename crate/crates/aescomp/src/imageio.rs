//! Raster decoding into the core's RGB8 image type.

use std::path::Path;

use aescomp_core::RawImage;
use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

/// Decodes a PNG or JPEG file. Grayscale is replicated to RGB and alpha is dropped.
pub fn load_image(path: &Path) -> Result<RawImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Decode(msg) => Error::Decode(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode_image(bytes: &[u8]) -> Result<RawImage> {
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Decode(e.to_string()))?;
    let img = reader.decode().map_err(|e| Error::Decode(e.to_string()))?;
    Ok(from_dynamic(img)?)
}

pub fn from_dynamic(img: DynamicImage) -> aescomp_core::Result<RawImage> {
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    RawImage::new(w, h, rgb.into_raw())
}

/// Writes an RGB8 image as PNG.
pub fn save_png(img: &RawImage, path: &Path) -> Result<()> {
    image::save_buffer(path, img.data(), img.width(), img.height(), image::ExtendedColorType::Rgb8).map_err(|e| match e
    {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode(other.to_string()),
    })
}
