//! Binary greyscale PGM (`P5`) targets.

use std::path::Path;

use covbalance_core::problem::Image;
use image::{DynamicImage, ImageFormat};

use crate::error::{CliError, Result};

/// Decodes a `P5` file into an image with pixels in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    if !bytes.starts_with(b"P5") {
        return Err("not a binary PGM file (expected magic `P5`)".into());
    }
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| e.to_string())?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw().into_iter().map(|p| f64::from(p) / 255.0).collect(),
        DynamicImage::ImageLuma16(img) => img.into_raw().into_iter().map(|p| f64::from(p) / 65535.0).collect(),
        other => return Err(format!("unexpected pixel layout {:?}", other.color())),
    };
    Image::new(width, height, pixels).map_err(|e| e.to_string())
}

pub fn load_pgm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_pgm(&bytes).map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

/// Encodes an image as an 8-bit `P5` file. Pixels are rounded to 1/255.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}
