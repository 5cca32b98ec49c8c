use std::path::Path;

use houghvp::geometry::Branch;
use houghvp::synth::{add_salt_pepper, gen_bundle_pair, gen_document, sample_vp, BundleParams};
use houghvp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, SynthKind};
use crate::dataset::{Manifest, Sidecar, Split, DATASET_VERSION, MANIFEST_FORMAT, MANIFEST_NAME, SAMPLE_FORMAT};
use crate::error::{CliError, CliResult};
use crate::io::{save_gray, write_json};

const MAX_ATTEMPTS: usize = 100;

fn bundle_sample(cfg: &RunConfig, seed: u64) -> CliResult<(houghvp::GrayImage, Sidecar)> {
    let s = &cfg.synth;
    let (w, h) = (s.width, s.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (s.document.min_diag, s.document.max_diag);
    for _ in 0..MAX_ATTEMPTS {
        let vh = sample_vp(&mut rng, Branch::Horizontal, w as f64, h as f64, lo, hi, s.document.max_tilt_deg);
        let vv = sample_vp(&mut rng, Branch::Vertical, w as f64, h as f64, lo, hi, s.document.max_tilt_deg);
        let params = BundleParams { n_lines: rng.random_range(s.bundle_lines.0..=s.bundle_lines.1), ..s.bundle };
        match gen_bundle_pair(vh, vv, w, h, &params, seed) {
            Ok(img) => {
                let sidecar = Sidecar {
                    format: SAMPLE_FORMAT.into(),
                    version: DATASET_VERSION,
                    image: String::new(),
                    width: w,
                    height: h,
                    split: Split::Train,
                    quad: None,
                    horizontal_vp: Some(vh),
                    vertical_vp: Some(vv),
                    seed: Some(seed),
                    params: Some(serde_json::to_value(params)?),
                };
                return Ok((img, sidecar));
            }
            Err(Error::Regime(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(CliError::Numeric(format!("no drawable bundle pair after {MAX_ATTEMPTS} attempts (seed {seed})")))
}

fn document_sample(cfg: &RunConfig, seed: u64) -> CliResult<(houghvp::GrayImage, Sidecar)> {
    let s = &cfg.synth;
    let sample = gen_document(seed, s.width, s.height, &s.document)?;
    let sidecar = Sidecar {
        format: SAMPLE_FORMAT.into(),
        version: DATASET_VERSION,
        image: String::new(),
        width: s.width,
        height: s.height,
        split: Split::Train,
        quad: Some(sample.truth.quad),
        horizontal_vp: Some(sample.truth.horizontal_vp),
        vertical_vp: Some(sample.truth.vertical_vp),
        seed: Some(seed),
        params: Some(serde_json::to_value(sample.params)?),
    };
    Ok((sample.image, sidecar))
}

/// Writes `count` samples, their sidecars and the manifest into `out`.
/// Sample `i` is generated from seed `cfg.seed + i`.
pub fn cmd_synth(count: usize, out: &Path, cfg: &RunConfig) -> CliResult<Manifest> {
    std::fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    let n_test = (count as f64 * cfg.synth.holdout_fraction).round() as usize;
    let names: Vec<CliResult<String>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let (mut img, mut sidecar) = match cfg.synth.kind {
                SynthKind::Document => document_sample(cfg, seed)?,
                SynthKind::BundlePair => bundle_sample(cfg, seed)?,
            };
            if cfg.synth.salt_pepper > 0.0 {
                add_salt_pepper(&mut img, cfg.synth.salt_pepper, seed);
            }
            let stem = format!("sample_{i:05}");
            sidecar.image = format!("{stem}.png");
            sidecar.split = if i >= count - n_test { Split::Test } else { Split::Train };
            save_gray(&out.join(&sidecar.image), &img)?;
            let name = format!("{stem}.json");
            write_json(&out.join(&name), &sidecar)?;
            Ok(name)
        })
        .collect();
    let samples = names.into_iter().collect::<CliResult<Vec<_>>>()?;
    let manifest = Manifest { format: MANIFEST_FORMAT.into(), version: DATASET_VERSION, count, samples, config: cfg.to_value() };
    write_json(&out.join(MANIFEST_NAME), &manifest)?;
    Ok(manifest)
}
