//! PNG input and output. Inputs may be 8- or 16-bit; grayscale is expanded
//! to three channels and alpha is dropped.

use std::path::Path;

use image::{DynamicImage, ImageFormat};
use lutcascade::ImageBuffer;

use crate::error::{CliError, CliResult};

/// A decoded image at its native bit depth.
pub enum Loaded {
    U8(ImageBuffer<u8>),
    U16(ImageBuffer<u16>),
}

impl Loaded {
    pub fn to_f32(&self) -> ImageBuffer<f32> {
        match self {
            Loaded::U8(i) => i.to_f32(),
            Loaded::U16(i) => i.to_f32(),
        }
    }

    /// The 8-bit view; 16-bit data is rounded to 8 bits.
    pub fn to_u8(&self) -> ImageBuffer<u8> {
        match self {
            Loaded::U8(i) => i.clone(),
            Loaded::U16(i) => i.to_u8(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Loaded::U8(i) => (i.height(), i.width()),
            Loaded::U16(i) => (i.height(), i.width()),
        }
    }
}

pub fn load(path: &Path) -> CliResult<Loaded> {
    let img = image::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let loaded = match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => {
            Loaded::U8(ImageBuffer::from_interleaved(h, w, img.to_rgb8().as_raw())?)
        }
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => Loaded::U16(ImageBuffer::from_interleaved(
            h,
            w,
            img.to_rgb16().as_raw(),
        )?),
        _ => {
            return Err(CliError::io(format!(
                "{}: unsupported pixel format",
                path.display()
            )));
        }
    };
    Ok(loaded)
}

pub fn save_u8(image: &ImageBuffer<u8>, path: &Path) -> CliResult<()> {
    let buf = image::RgbImage::from_raw(
        image.width() as u32,
        image.height() as u32,
        image.to_interleaved(),
    )
    .expect("buffer matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn save_u16(image: &ImageBuffer<u16>, path: &Path) -> CliResult<()> {
    let buf = image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(
        image.width() as u32,
        image.height() as u32,
        image.to_interleaved(),
    )
    .expect("buffer matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
