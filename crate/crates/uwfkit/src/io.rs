//! 8-bit PNG and binary PGM/PPM decoding and encoding.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageError, ImageFormat, ImageReader};
use thiserror::Error;
use uwfkit_core::Raster;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported format: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("{path}: corrupt file: {detail}")]
    CorruptFile { path: PathBuf, detail: String },
}

fn corrupt(path: &Path, detail: impl ToString) -> ImageIoError {
    ImageIoError::CorruptFile {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

fn unsupported(path: &Path, detail: impl ToString) -> ImageIoError {
    ImageIoError::UnsupportedFormat {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    }
}

/// Reads an 8-bit PNG or binary PGM/PPM into a `[0, 1]` raster (`v / 255`).
/// Alpha is dropped; 16-bit data is rejected.
pub fn decode_image(path: &Path) -> Result<Raster, ImageIoError> {
    let bytes = fs::read(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_bytes(&bytes, path)
}

/// [`decode_image`] on an in-memory file; `path` is only used in errors.
pub fn decode_bytes(bytes: &[u8], path: &Path) -> Result<Raster, ImageIoError> {
    let format = image::guess_format(bytes).map_err(|_| corrupt(path, "unrecognized header"))?;
    match format {
        ImageFormat::Png => {}
        ImageFormat::Pnm => match bytes.get(..2) {
            Some(b"P5") | Some(b"P6") => {}
            _ => return Err(unsupported(path, "only binary P5/P6 netpbm files are read")),
        },
        other => return Err(unsupported(path, format!("{other:?}"))),
    }
    let reader = ImageReader::with_format(std::io::Cursor::new(bytes), format);
    let img = reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => unsupported(path, u),
        other => corrupt(path, other),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, img.to_rgb8().into_raw()),
        other => {
            return Err(unsupported(
                path,
                format!("{:?} samples (8-bit only)", other.color()),
            ))
        }
    };
    let values = data.iter().map(|&v| v as f64 / 255.0).collect();
    Raster::new(w, h, channels, values).map_err(|e| corrupt(path, e))
}

/// `round(v * 255)`, half up, after clamping to `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes PNG for `.png` and binary PGM/PPM for `.pgm`, `.ppm` and `.pnm`.
pub fn encode_image(r: &Raster, path: &Path) -> Result<(), ImageIoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes: Vec<u8> = r.data().iter().map(|&v| quantize(v)).collect();
    let (w, h) = (r.width() as u32, r.height() as u32);
    let color = match r.channels() {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        c => return Err(unsupported(path, format!("{c} channels"))),
    };
    let io_err = |source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let result = match ext.as_str() {
        "png" => PngEncoder::new(&mut out).write_image(&bytes, w, h, color),
        "pgm" | "ppm" | "pnm" => {
            let subtype = if r.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(&mut out)
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)
        }
        _ => {
            return Err(unsupported(
                path,
                "output extension must be png, pgm, ppm or pnm",
            ))
        }
    };
    result.map_err(|e| match e {
        ImageError::IoError(source) => io_err(source),
        other => unsupported(path, other),
    })?;
    out.flush().map_err(io_err)
}
