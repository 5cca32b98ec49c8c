use std::path::Path;

use houghvp::geometry::HomogeneousPoint;
use houghvp::rectify::{homography_from_vps, quad_metrics, transform_quad, AngleStats, MetricReport, Quad};
use houghvp::vp::angular_error_deg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::detect::{Detector, Method};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, DatasetRecord};
use crate::error::{CliError, CliResult};
use crate::io::write_json;

pub const METRICS_FORMAT: &str = "houghvp-metrics";
pub const METRICS_VERSION: u32 = 1;

/// Where the VPs used for rectification come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalSource {
    /// Ground-truth VPs (or those implied by the quad).
    Truth,
    Classical,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub d1: f64,
    pub d2: f64,
    pub used: usize,
    pub excluded: usize,
}

impl From<&MetricReport> for Summary {
    fn from(r: &MetricReport) -> Self {
        Self { d1: r.d1, d2: r.d2, used: r.used, excluded: r.excluded }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpErrorSummary {
    pub count: usize,
    pub horizontal_mean_deg: f64,
    pub vertical_mean_deg: f64,
    pub horizontal_max_deg: f64,
    pub vertical_max_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub image: String,
    pub horizontal_vp: Option<[f64; 3]>,
    pub vertical_vp: Option<[f64; 3]>,
    pub before: Option<AngleStats>,
    pub after: Option<AngleStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub source: EvalSource,
    /// Records with a quad that passed ingestion.
    pub documents: usize,
    pub dropped_outside: usize,
    /// Documents whose VPs or rectification failed; they are left out of both summaries.
    pub failed: usize,
    pub before: Option<Summary>,
    pub after: Option<Summary>,
    pub vp_error: Option<VpErrorSummary>,
    pub per_document: Vec<DocumentEntry>,
    pub config: RunConfig,
}

struct Outcome {
    quad: Quad,
    rectified: Quad,
    vps: (HomogeneousPoint, HomogeneousPoint),
    errors: Option<(f64, f64)>,
}

fn evaluate(r: &DatasetRecord, quad: &Quad, detector: Option<&Detector>) -> CliResult<Outcome> {
    let (w, h) = (r.sidecar.width as f64, r.sidecar.height as f64);
    let truth = r.vps();
    let vps = match detector {
        None => truth.ok_or_else(|| CliError::input(format!("{}: no ground-truth VPs", r.name())))?,
        Some(d) => {
            let det = d.detect(&r.load_image()?)?;
            (det.horizontal, det.vertical)
        }
    };
    let errors = match (detector, truth) {
        (Some(_), Some((th, tv))) => Some((angular_error_deg(&vps.0, &th, w, h), angular_error_deg(&vps.1, &tv, w, h))),
        _ => None,
    };
    let hom = homography_from_vps(vps.0, vps.1, w, h)?;
    Ok(Outcome { quad: *quad, rectified: transform_quad(quad, &hom)?, vps, errors })
}

/// Scores document quads before and after rectification with VPs from `source`.
pub fn cmd_eval(data: &Path, source: EvalSource, weights: Option<&Path>, out: Option<&Path>, cfg: &RunConfig) -> CliResult<MetricsReport> {
    let ds = load_dataset(data)?;
    let detector = match source {
        EvalSource::Truth => None,
        EvalSource::Classical => Some(Detector::new(Method::Classical, weights, cfg)?),
        EvalSource::Network => Some(Detector::new(Method::Network, weights, cfg)?),
    };
    let docs: Vec<(&DatasetRecord, &Quad)> = ds.records.iter().filter_map(|r| r.sidecar.quad.as_ref().map(|q| (r, q))).collect();
    if docs.is_empty() {
        return Err(CliError::input(format!("{}: no documents with a quad", data.display())));
    }
    let outcomes: Vec<CliResult<Outcome>> = docs.par_iter().map(|(r, q)| evaluate(r, q, detector.as_ref())).collect();

    let mut per_document = Vec::new();
    let mut ok = Vec::new();
    for ((r, _), o) in docs.iter().zip(outcomes) {
        match o {
            Ok(o) => {
                per_document.push(DocumentEntry {
                    image: r.name(),
                    horizontal_vp: Some(o.vps.0.as_array()),
                    vertical_vp: Some(o.vps.1.as_array()),
                    before: None,
                    after: None,
                    error: None,
                });
                ok.push((per_document.len() - 1, o));
            }
            // Unreadable inputs abort the run; numeric failures are per-document.
            Err(e @ CliError::Input(_)) => return Err(e),
            Err(CliError::Numeric(msg)) => per_document.push(DocumentEntry {
                image: r.name(),
                horizontal_vp: None,
                vertical_vp: None,
                before: None,
                after: None,
                error: Some(msg),
            }),
        }
    }
    let failed = docs.len() - ok.len();
    let (mut before, mut after) = (None, None);
    if !ok.is_empty() {
        let b = quad_metrics(&ok.iter().map(|(_, o)| o.quad).collect::<Vec<_>>());
        let a = quad_metrics(&ok.iter().map(|(_, o)| o.rectified).collect::<Vec<_>>());
        for (report, slot, after_side) in [(&b, &mut before, false), (&a, &mut after, true)] {
            if let Ok(rep) = report {
                *slot = Some(Summary::from(rep));
                for ((idx, _), stats) in ok.iter().zip(&rep.per_document) {
                    let e = &mut per_document[*idx];
                    if after_side {
                        e.after = *stats;
                    } else {
                        e.before = *stats;
                    }
                }
            }
        }
    }
    let errs: Vec<(f64, f64)> = ok.iter().filter_map(|(_, o)| o.errors).collect();
    let vp_error = (!errs.is_empty()).then(|| {
        let n = errs.len() as f64;
        VpErrorSummary {
            count: errs.len(),
            horizontal_mean_deg: errs.iter().map(|e| e.0).sum::<f64>() / n,
            vertical_mean_deg: errs.iter().map(|e| e.1).sum::<f64>() / n,
            horizontal_max_deg: errs.iter().map(|e| e.0).fold(0.0, f64::max),
            vertical_max_deg: errs.iter().map(|e| e.1).fold(0.0, f64::max),
        }
    });
    let report = MetricsReport {
        format: METRICS_FORMAT.into(),
        version: METRICS_VERSION,
        dataset: data.display().to_string(),
        source,
        documents: docs.len(),
        dropped_outside: ds.dropped_outside,
        failed,
        before,
        after,
        vp_error,
        per_document,
        config: cfg.clone(),
    };
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    Ok(report)
}
