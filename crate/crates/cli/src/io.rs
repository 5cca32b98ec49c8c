//! Image decoding, atomic file output and the raw map format.
//!
//! A raw map `<prefix>` is three files: `<prefix>.f32` holds the values as
//! little-endian `f32` in C order (rows are the first dimension),
//! `<prefix>.json` is the header described by [`RawHeader`] and
//! `<prefix>.png` is an 8-bit min-max normalized preview.

use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use houghvp::GrayImage;
use image::{DynamicImage, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const RAW_FORMAT: &str = "houghvp-raw";
pub const RAW_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Rec. 601 luma in `[0, 1]`.
pub fn rec601(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Loads a PNG or PNM image as grayscale in `[0, 1]`. Alpha is ignored.
pub fn load_gray(path: &Path) -> CliResult<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .with_guessed_format()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        _ => return Err(CliError::input(format!("{}: only PNG and PGM/PPM images are supported", path.display()))),
    }
    let img = reader.decode().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(to_gray(&img))
}

pub fn to_gray(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
        other => other.to_rgb32f().pixels().map(|p| rec601(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64)).collect(),
    };
    GrayImage::from_vec(w, h, data).expect("decoded images are non-empty")
}

fn output_format(path: &Path) -> CliResult<ImageFormat> {
    match ImageFormat::from_path(path) {
        Ok(f @ (ImageFormat::Png | ImageFormat::Pnm)) => Ok(f),
        _ => Err(CliError::input(format!("{}: output must be .png or .pgm", path.display()))),
    }
}

fn encode(img: &GrayImage, format: ImageFormat, f: impl Fn(f64) -> f64) -> CliResult<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| (f(v) * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes).expect("buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, format)?;
    Ok(out.into_inner())
}

/// Saves values in `[0, 1]` as 8-bit gray, clamping outliers.
pub fn save_gray(path: &Path, img: &GrayImage) -> CliResult<()> {
    let bytes = encode(img, output_format(path)?, |v| if v.is_finite() { v } else { 0.0 })?;
    write_atomic(path, &bytes)
}

/// Saves a min-max normalized 8-bit rendering; a constant image is black.
pub fn save_preview(path: &Path, img: &GrayImage) -> CliResult<()> {
    let finite = img.data().iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let bytes = encode(img, output_format(path)?, |v| if v.is_finite() && span > 0.0 { (v - lo) / span } else { 0.0 })?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub format: String,
    pub version: u32,
    /// `[rows, cols]`.
    pub dims: [usize; 2],
    pub dtype: String,
    pub order: String,
    pub quadrant: String,
    pub src_w: usize,
    pub src_h: usize,
    pub data_file: String,
    pub config: RunConfig,
}

pub fn raw_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".f32"), with(".json"), with(".png"))
}

/// Writes the `.f32`, `.json` and `.png` files of a raw map.
pub fn write_raw_map(prefix: &Path, data: &[f64], rows: usize, cols: usize, quadrant: &str, src: (usize, usize), config: &RunConfig) -> CliResult<RawHeader> {
    if data.len() != rows * cols || rows == 0 || cols == 0 {
        return Err(CliError::input(format!("raw map of {} values does not match {rows}x{cols}", data.len())));
    }
    let (bin, json, png) = raw_paths(prefix);
    let mut bytes = Vec::with_capacity(4 * data.len());
    for &v in data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_atomic(&bin, &bytes)?;
    let header = RawHeader {
        format: RAW_FORMAT.into(),
        version: RAW_VERSION,
        dims: [rows, cols],
        dtype: "f32le".into(),
        order: "C".into(),
        quadrant: quadrant.into(),
        src_w: src.0,
        src_h: src.1,
        data_file: bin.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        config: config.clone(),
    };
    write_json(&json, &header)?;
    save_preview(&png, &GrayImage::from_vec(cols, rows, data.to_vec())?)?;
    Ok(header)
}

/// Reads a raw map back from its header path or prefix.
pub fn read_raw_map(prefix: &Path) -> CliResult<(RawHeader, Vec<f32>)> {
    let (bin, json, _) = raw_paths(prefix);
    let header: RawHeader = read_json(&json)?;
    if header.format != RAW_FORMAT || header.version != RAW_VERSION || header.dtype != "f32le" || header.order != "C" {
        return Err(CliError::input(format!("{}: not a version {RAW_VERSION} f32le raw map", json.display())));
    }
    let bytes = std::fs::read(&bin).map_err(|e| CliError::input(format!("{}: {e}", bin.display())))?;
    let n = header.dims[0] * header.dims[1];
    if bytes.len() != 4 * n {
        return Err(CliError::input(format!("{}: expected {} bytes, found {}", bin.display(), 4 * n, bytes.len())));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_weights() {
        let rgb = image::RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 0, 255]).unwrap();
        let g = to_gray(&DynamicImage::ImageRgb8(rgb));
        assert!((g.get(0, 0) - 0.299).abs() < 1e-6);
        assert!((g.get(1, 0) - 0.114).abs() < 1e-6);
    }

    #[test]
    fn raw_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("m");
        let data: Vec<f64> = (0..12).map(|v| v as f64 * 0.5 - 1.0).collect();
        write_raw_map(&prefix, &data, 3, 4, "H12", (4, 2), &RunConfig::default()).unwrap();
        let (h, back) = read_raw_map(&prefix).unwrap();
        assert_eq!(h.dims, [3, 4]);
        assert_eq!(back.iter().map(|&v| v as f64).collect::<Vec<_>>(), data);
        let preview = image::open(dir.path().join("m.png")).unwrap().to_luma8();
        assert_eq!(preview.get_pixel(0, 0).0[0], 0);
        assert_eq!(preview.get_pixel(3, 2).0[0], 255);
    }

    #[test]
    fn constant_preview_is_black_and_formats_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_vec(2, 2, vec![0.3; 4]).unwrap();
        save_preview(&dir.path().join("c.pgm"), &img).unwrap();
        let back = load_gray(&dir.path().join("c.pgm")).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.0));
        assert!(matches!(save_gray(&dir.path().join("c.jpg"), &img), Err(CliError::Input(_))));
        std::fs::write(dir.path().join("x.png"), b"not an image").unwrap();
        assert!(matches!(load_gray(&dir.path().join("x.png")), Err(CliError::Input(_))));
    }
}
