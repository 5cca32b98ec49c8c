use std::path::Path;

use houghvp::geometry::HomogeneousPoint;
use houghvp::rectify::{homography_from_vps, warp, Mat3};
use serde::{Deserialize, Serialize};

use crate::commands::detect::{Detector, Method, VpReport, VP_FORMAT};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{load_gray, read_json, save_gray, write_json};

pub const RECTIFY_FORMAT: &str = "houghvp-rectify";
pub const RECTIFY_VERSION: u32 = 1;

/// Where the two VPs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum VpSource {
    Inline { horizontal: HomogeneousPoint, vertical: HomogeneousPoint },
    File(std::path::PathBuf),
    Auto(Method, Option<std::path::PathBuf>),
}

/// Parses `x,y,w` into a homogeneous point.
pub fn parse_vp(s: &str) -> CliResult<HomogeneousPoint> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("cannot parse VP {s:?}; expected x,y,w")))?;
    let p = match parts[..] {
        [x, y, w] => HomogeneousPoint::new(x, y, w),
        [x, y] => HomogeneousPoint::new(x, y, 1.0),
        _ => return Err(CliError::input(format!("cannot parse VP {s:?}; expected x,y,w"))),
    };
    if !p.is_valid() {
        return Err(CliError::input(format!("VP {s:?} is not a valid homogeneous point")));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifyReport {
    pub format: String,
    pub version: u32,
    pub image: String,
    pub output: String,
    pub horizontal_vp: [f64; 3],
    pub vertical_vp: [f64; 3],
    /// Rectifying homography in source pixel coordinates.
    pub homography: Mat3,
    /// Map from source pixels to output pixels, including framing.
    pub output_homography: Mat3,
    pub output_width: usize,
    pub output_height: usize,
    pub config: RunConfig,
}

pub fn cmd_rectify(input: &Path, source: &VpSource, out: &Path, cfg: &RunConfig) -> CliResult<RectifyReport> {
    let img = load_gray(input)?;
    let (horizontal, vertical) = match source {
        VpSource::Inline { horizontal, vertical } => (*horizontal, *vertical),
        VpSource::File(path) => {
            let r: VpReport = read_json(path)?;
            if r.format != VP_FORMAT {
                return Err(CliError::input(format!("{}: not a VP file", path.display())));
            }
            if (r.width, r.height) != (img.width(), img.height()) {
                return Err(CliError::input(format!("{}: VPs are for a {}x{} image", path.display(), r.width, r.height)));
            }
            r.vps()
        }
        VpSource::Auto(method, weights) => {
            let d = Detector::new(*method, weights.as_deref(), cfg)?.detect(&img)?;
            (d.horizontal, d.vertical)
        }
    };
    let h = homography_from_vps(horizontal, vertical, img.width() as f64, img.height() as f64)?;
    let warped = warp(&img, &h, cfg.rectify.max_side)?;
    save_gray(out, &warped.image)?;
    let report = RectifyReport {
        format: RECTIFY_FORMAT.into(),
        version: RECTIFY_VERSION,
        image: input.display().to_string(),
        output: out.display().to_string(),
        horizontal_vp: horizontal.as_array(),
        vertical_vp: vertical.as_array(),
        homography: h.m,
        output_homography: warped.homography.m,
        output_width: warped.image.width(),
        output_height: warped.image.height(),
        config: cfg.clone(),
    };
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".json");
    write_json(Path::new(&sidecar), &report)?;
    Ok(report)
}
