//! Dataset manifests, per-image sidecars and the ingestion filter.
//!
//! A dataset directory holds `manifest.json`, listing sidecar files relative
//! to the directory. Each sidecar names its image (relative to the sidecar)
//! and may carry the page quadrangle, the two vanishing points, the
//! generator seed and parameters.

use std::path::{Path, PathBuf};

use houghvp::geometry::{HomogeneousPoint, ImagePoint};
use houghvp::rectify::Quad;
use houghvp::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

pub const MANIFEST_FORMAT: &str = "houghvp-dataset";
pub const SAMPLE_FORMAT: &str = "houghvp-sample";
pub const DATASET_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub samples: Vec<String>,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub image: String,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<Quad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizontal_vp: Option<HomogeneousPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical_vp: Option<HomogeneousPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub image_path: PathBuf,
    pub sidecar: Sidecar,
}

impl DatasetRecord {
    pub fn name(&self) -> String {
        self.sidecar.image.clone()
    }

    /// Ground-truth VPs, from the sidecar or else from the quad edges.
    pub fn vps(&self) -> Option<(HomogeneousPoint, HomogeneousPoint)> {
        match (self.sidecar.horizontal_vp, self.sidecar.vertical_vp) {
            (Some(h), Some(v)) => Some((h, v)),
            _ => self.sidecar.quad.as_ref().map(vps_from_quad),
        }
    }

    pub fn load_image(&self) -> CliResult<GrayImage> {
        let img = crate::io::load_gray(&self.image_path)?;
        if (img.width(), img.height()) != (self.sidecar.width, self.sidecar.height) {
            return Err(CliError::input(format!(
                "{}: image is {}x{}, sidecar says {}x{}",
                self.image_path.display(),
                img.width(),
                img.height(),
                self.sidecar.width,
                self.sidecar.height
            )));
        }
        Ok(img)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub records: Vec<DatasetRecord>,
    /// Records dropped because more than one quad corner lies outside the image.
    pub dropped_outside: usize,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.sidecar.split == split)
    }
}

pub fn corners_outside(q: &Quad, width: f64, height: f64) -> usize {
    q.corners.iter().filter(|c| !(c.x >= 0.0 && c.y >= 0.0 && c.x <= width && c.y <= height)).count()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn line(a: ImagePoint, b: ImagePoint) -> [f64; 3] {
    cross([a.x, a.y, 1.0], [b.x, b.y, 1.0])
}

/// Intersections of the top/bottom and left/right edges.
pub fn vps_from_quad(q: &Quad) -> (HomogeneousPoint, HomogeneousPoint) {
    let [tl, tr, br, bl] = q.corners;
    let h = cross(line(tl, tr), line(bl, br));
    let v = cross(line(tl, bl), line(tr, br));
    (HomogeneousPoint::from_array(h).normalized(), HomogeneousPoint::from_array(v).normalized())
}

/// Loads a dataset from its directory or manifest path and applies the
/// ingestion filter.
pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.format != MANIFEST_FORMAT || manifest.version != DATASET_VERSION {
        return Err(CliError::input(format!("{}: not a version {DATASET_VERSION} dataset manifest", manifest_path.display())));
    }
    let mut records = Vec::new();
    let mut dropped_outside = 0;
    for rel in &manifest.samples {
        let sidecar_path = root.join(rel);
        let sidecar: Sidecar = read_json(&sidecar_path)?;
        if sidecar.format != SAMPLE_FORMAT || sidecar.version != DATASET_VERSION {
            return Err(CliError::input(format!("{}: not a version {DATASET_VERSION} sample sidecar", sidecar_path.display())));
        }
        if let Some(q) = &sidecar.quad {
            if corners_outside(q, sidecar.width as f64, sidecar.height as f64) > 1 {
                dropped_outside += 1;
                continue;
            }
        }
        let dir = sidecar_path.parent().map(Path::to_path_buf).unwrap_or_default();
        records.push(DatasetRecord { image_path: dir.join(&sidecar.image), sidecar });
    }
    Ok(Dataset { root, records, dropped_outside })
}

/// Per-axis map between an image and its resized copy, in the pixel-center
/// convention of [`GrayImage::resize_to_width`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub sx: f64,
    pub sy: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling { sx: 1.0, sy: 1.0 };

    pub fn between(from: (usize, usize), to: (usize, usize)) -> Self {
        Self { sx: to.0 as f64 / from.0 as f64, sy: to.1 as f64 / from.1 as f64 }
    }

    /// Source coordinates to resized coordinates.
    pub fn forward(&self, p: HomogeneousPoint) -> HomogeneousPoint {
        HomogeneousPoint::new((p.hx + 0.5 * p.hw) * self.sx - 0.5 * p.hw, (p.hy + 0.5 * p.hw) * self.sy - 0.5 * p.hw, p.hw)
    }

    pub fn backward(&self, p: HomogeneousPoint) -> HomogeneousPoint {
        HomogeneousPoint::new((p.hx + 0.5 * p.hw) / self.sx - 0.5 * p.hw, (p.hy + 0.5 * p.hw) / self.sy - 0.5 * p.hw, p.hw)
    }
}

/// Resizes to `width` (no-op for `None` or an equal width).
pub fn scale_image(img: &GrayImage, width: Option<usize>) -> CliResult<(GrayImage, Scaling)> {
    match width {
        Some(w) if w != img.width() => {
            let out = img.resize_to_width(w)?;
            let s = Scaling::between((img.width(), img.height()), (out.width(), out.height()));
            Ok((out, s))
        }
        _ => Ok((img.clone(), Scaling::IDENTITY)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_vps_of_a_trapezoid() {
        let q = Quad::new([ImagePoint::new(10.0, 0.0), ImagePoint::new(30.0, 0.0), ImagePoint::new(40.0, 20.0), ImagePoint::new(0.0, 20.0)]);
        let (h, v) = vps_from_quad(&q);
        assert!(h.hw.abs() < 1e-12 && h.hy.abs() < 1e-12);
        let p = v.to_point().unwrap();
        assert!((p.x - 20.0).abs() < 1e-9 && (p.y + 20.0).abs() < 1e-9);
    }

    #[test]
    fn corner_counting() {
        let q = Quad::new([ImagePoint::new(-1.0, 0.0), ImagePoint::new(10.0, -0.5), ImagePoint::new(10.0, 10.0), ImagePoint::new(0.0, 10.0)]);
        assert_eq!(corners_outside(&q, 10.0, 10.0), 2);
        assert_eq!(corners_outside(&Quad::rect(0.0, 0.0, 10.0, 10.0), 10.0, 10.0), 0);
    }

    #[test]
    fn scaling_round_trip_and_pixel_centers() {
        let s = Scaling::between((800, 600), (400, 300));
        let p = s.forward(HomogeneousPoint::new(-0.5, 599.5, 1.0));
        assert!((p.hx + 0.5).abs() < 1e-12 && (p.hy - 299.5).abs() < 1e-12);
        let d = HomogeneousPoint::direction(1.0, 2.0);
        let b = s.backward(s.forward(d));
        assert_eq!((b.hx, b.hy, b.hw), (1.0, 2.0, 0.0));
        let q = HomogeneousPoint::new(12.0, -3.0, 0.5);
        let r = s.backward(s.forward(q));
        assert!((r.hx - q.hx).abs() < 1e-12 && (r.hy - q.hy).abs() < 1e-12);
    }
}
