use std::path::{Path, PathBuf};

use houghvp::geometry::{Branch, HomogeneousPoint};
use houghvp::nn::checkpoint::Checkpoint;
use houghvp::nn::Network;
use houghvp::vp::{classical_detect, network_detect, BranchEstimate, ClassicalParams, VanishingPair};
use houghvp::GrayImage;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{scale_image, Scaling};
use crate::error::{CliError, CliResult};
use crate::io::{load_gray, write_json};

pub const VP_FORMAT: &str = "houghvp-vp";
pub const VP_VERSION: u32 = 1;
pub const HORIZONTAL_CKPT: &str = "horizontal.ckpt.json";
pub const VERTICAL_CKPT: &str = "vertical.ckpt.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classical,
    Network,
}

/// A ready-to-run detector.
pub enum Detector {
    Classical { params: ClassicalParams, width: Option<usize> },
    Network { horizontal: Box<Network>, vertical: Box<Network>, width: usize },
}

pub fn checkpoint_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(HORIZONTAL_CKPT), dir.join(VERTICAL_CKPT))
}

fn load_branch(path: &Path, branch: Branch) -> CliResult<(Network, Option<RunConfig>)> {
    let ck = Checkpoint::load(path)?;
    if ck.branch != branch {
        return Err(CliError::input(format!("{}: checkpoint is for the {} branch", path.display(), ck.branch.name())));
    }
    let cfg = serde_json::from_value::<RunConfig>(ck.config.clone()).ok();
    Ok((ck.network()?, cfg))
}

impl Detector {
    pub fn new(method: Method, weights: Option<&Path>, cfg: &RunConfig) -> CliResult<Self> {
        match method {
            Method::Classical => Ok(Detector::Classical { params: cfg.classical, width: cfg.scale_width }),
            Method::Network => {
                let dir = weights.ok_or_else(|| CliError::input("--weights is required for the network method"))?;
                let (hp, vp) = checkpoint_paths(dir);
                let (horizontal, hcfg) = load_branch(&hp, Branch::Horizontal)?;
                let (vertical, _) = load_branch(&vp, Branch::Vertical)?;
                // Inference runs at the width the weights were trained at.
                let width = hcfg.map_or(cfg.network.input_width, |c| c.network.input_width);
                Ok(Detector::Network { horizontal: Box::new(horizontal), vertical: Box::new(vertical), width })
            }
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Detector::Classical { .. } => Method::Classical,
            Detector::Network { .. } => Method::Network,
        }
    }

    /// Detects both VPs; estimates are reported in the coordinates of `img`.
    pub fn detect(&self, img: &GrayImage) -> CliResult<Detection> {
        let (work, scaling, pair) = match self {
            Detector::Classical { params, width } => {
                let (work, s) = scale_image(img, *width)?;
                let pair = classical_detect(&work, params)?;
                (work, s, pair)
            }
            Detector::Network { horizontal, vertical, width } => {
                let (work, s) = scale_image(img, Some(*width))?;
                let pair = network_detect(horizontal, vertical, &work)?;
                (work, s, pair)
            }
        };
        Ok(Detection {
            horizontal: scaling.backward(pair.horizontal.vp).normalized(),
            vertical: scaling.backward(pair.vertical.vp).normalized(),
            working: (work.width(), work.height()),
            scaling,
            pair,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub horizontal: HomogeneousPoint,
    pub vertical: HomogeneousPoint,
    pub working: (usize, usize),
    pub scaling: Scaling,
    pub pair: VanishingPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    /// Homogeneous VP in source image pixels.
    pub vp: [f64; 3],
    /// The same VP in the resized working image.
    pub vp_working: [f64; 3],
    pub peak: [usize; 2],
    pub cell: [f64; 2],
    pub peak_value: f64,
    pub at_infinity: bool,
    pub inside_image: bool,
}

impl BranchReport {
    fn new(vp: HomogeneousPoint, e: &BranchEstimate) -> Self {
        Self {
            vp: vp.as_array(),
            vp_working: e.vp.as_array(),
            peak: [e.peak.0, e.peak.1],
            cell: [e.cell.0, e.cell.1],
            peak_value: e.peak_value,
            at_infinity: e.at_infinity,
            inside_image: e.inside_image,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpReport {
    pub format: String,
    pub version: u32,
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub method: Method,
    pub working_width: usize,
    pub working_height: usize,
    pub horizontal: BranchReport,
    pub vertical: BranchReport,
    pub warnings: Vec<String>,
    pub config: RunConfig,
}

impl VpReport {
    pub fn new(image: &str, size: (usize, usize), method: Method, d: &Detection, cfg: &RunConfig) -> Self {
        let mut warnings = Vec::new();
        for (name, e) in [("horizontal", &d.pair.horizontal), ("vertical", &d.pair.vertical)] {
            if e.inside_image {
                warnings.push(format!("{name} VP lies inside the image; the estimate is poorly conditioned"));
            }
            if e.at_infinity {
                warnings.push(format!("{name} VP is at infinity"));
            }
        }
        Self {
            format: VP_FORMAT.into(),
            version: VP_VERSION,
            image: image.into(),
            width: size.0,
            height: size.1,
            method,
            working_width: d.working.0,
            working_height: d.working.1,
            horizontal: BranchReport::new(d.horizontal, &d.pair.horizontal),
            vertical: BranchReport::new(d.vertical, &d.pair.vertical),
            warnings,
            config: cfg.clone(),
        }
    }

    pub fn vps(&self) -> (HomogeneousPoint, HomogeneousPoint) {
        (HomogeneousPoint::from_array(self.horizontal.vp), HomogeneousPoint::from_array(self.vertical.vp))
    }
}

pub fn cmd_detect_vp(input: &Path, method: Method, weights: Option<&Path>, out: Option<&Path>, cfg: &RunConfig) -> CliResult<VpReport> {
    let img = load_gray(input)?;
    let detector = Detector::new(method, weights, cfg)?;
    let d = detector.detect(&img)?;
    let report = VpReport::new(&input.display().to_string(), (img.width(), img.height()), method, &d, cfg);
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}
