use std::collections::HashMap;
use std::path::{Path, PathBuf};

use houghvp::geometry::{Branch, HomogeneousPoint};
use houghvp::nn::checkpoint::Checkpoint;
use houghvp::nn::train::dataset_loss;
use houghvp::nn::{build_network, Network, NetworkSpec, Tensor, TrainSample, Trainer};
use houghvp::vp::{angular_error_deg, make_target, network_detect_branch, DoubleHoughFrame};
use houghvp::{Error, GrayImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::detect::{HORIZONTAL_CKPT, VERTICAL_CKPT};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, scale_image, Split};
use crate::error::{CliError, CliResult};
use crate::io::{write_atomic, write_json};

pub const LOSS_LOG: &str = "loss.csv";
pub const REPORT_NAME: &str = "train_report.json";
pub const REPORT_FORMAT: &str = "houghvp-train-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub branch: String,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: Branch,
    pub train_samples: usize,
    pub heldout_samples: usize,
    /// Samples whose VP does not fit the output grid.
    pub skipped: usize,
    pub epochs: usize,
    pub resumed_from_epoch: Option<usize>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean held-out angular error of the untrained and trained branch, in degrees.
    pub untrained_error_deg: Option<f64>,
    pub trained_error_deg: Option<f64>,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub dropped_outside: usize,
    pub branches: Vec<BranchReport>,
    pub config: RunConfig,
}

struct Item {
    image: GrayImage,
    horizontal: HomogeneousPoint,
    vertical: HomogeneousPoint,
    split: Split,
}

/// Initialization seed of a branch; the two branches draw independent streams.
pub fn branch_seed(seed: u64, branch: Branch) -> u64 {
    match branch {
        Branch::Vertical => seed,
        Branch::Horizontal => seed ^ 0xA5A5_5A5A_0F0F_F0F0,
    }
}

fn frame_for(cache: &mut HashMap<(usize, usize), DoubleHoughFrame>, spec: &NetworkSpec, img: &GrayImage) -> CliResult<DoubleHoughFrame> {
    let key = (img.height(), img.width());
    if let Some(f) = cache.get(&key) {
        return Ok(f.clone());
    }
    let f = DoubleHoughFrame::for_network(spec, key.0, key.1)?;
    cache.insert(key, f.clone());
    Ok(f)
}

fn mean_error(net: &Network, held: &[(&GrayImage, HomogeneousPoint)]) -> CliResult<Option<f64>> {
    if held.is_empty() {
        return Ok(None);
    }
    let errs: Vec<CliResult<f64>> = held
        .par_iter()
        .map(|(img, vp)| {
            let e = network_detect_branch(net, img)?;
            Ok(angular_error_deg(&e.vp, vp, img.width() as f64, img.height() as f64))
        })
        .collect();
    let mut total = 0.0;
    for e in errs {
        total += e?;
    }
    Ok(Some(total / held.len() as f64))
}

fn read_log(path: &Path) -> CliResult<Vec<LossRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    r.deserialize().collect::<Result<Vec<LossRow>, _>>().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Rows are written vertical branch first, then by epoch, so a resumed log
/// reads the same as an uninterrupted one.
fn write_log(path: &Path, rows: &[LossRow]) -> CliResult<()> {
    let mut sorted: Vec<&LossRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.branch != Branch::Vertical.name(), r.epoch));
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in sorted {
        w.serialize(row).map_err(|e| CliError::input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    write_atomic(path, &bytes)
}

fn save_checkpoint(path: &Path, trainer: &Trainer, cfg: &RunConfig) -> CliResult<()> {
    let json = trainer.checkpoint(cfg.to_value()).to_json()?;
    write_atomic(path, json.as_bytes())
}

fn load_resume(path: &Path, spec: &NetworkSpec, cfg: &RunConfig) -> CliResult<Option<Trainer>> {
    if !path.exists() {
        return Ok(None);
    }
    let ck = Checkpoint::load(path)?;
    if ck.branch != spec.branch || ck.layers != spec.layers {
        return Err(CliError::input(format!("{}: checkpoint architecture differs from the configuration", path.display())));
    }
    Ok(Some(Trainer::resume(&ck, cfg.train_config())?))
}

/// Trains both branches on the train split of `data`, evaluating on the test
/// split. Checkpoints, the loss log and the report go to `out`. With
/// `resume`, existing checkpoints in `out` are continued up to the configured
/// epoch count.
pub fn cmd_train(data: &Path, out: &Path, resume: bool, cfg: &RunConfig) -> CliResult<TrainReport> {
    std::fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    let ds = load_dataset(data)?;
    let loaded: Vec<CliResult<Option<Item>>> = ds
        .records
        .par_iter()
        .map(|r| {
            let Some((h, v)) = r.vps() else { return Ok(None) };
            let (image, s) = scale_image(&r.load_image()?, Some(cfg.network.input_width))?;
            Ok(Some(Item { image, horizontal: s.forward(h), vertical: s.forward(v), split: r.sidecar.split }))
        })
        .collect();
    let items: Vec<Item> = loaded.into_iter().collect::<CliResult<Vec<_>>>()?.into_iter().flatten().collect();
    if !items.iter().any(|i| i.split == Split::Train) {
        return Err(CliError::input(format!("{}: no training samples with ground truth", data.display())));
    }

    let log_path = out.join(LOSS_LOG);
    let mut log = if resume { read_log(&log_path)? } else { Vec::new() };
    let mut branches = Vec::new();
    for (branch, ck_name) in [(Branch::Vertical, VERTICAL_CKPT), (Branch::Horizontal, HORIZONTAL_CKPT)] {
        let spec = build_network(branch, &cfg.network.arch.build())?;
        let mut frames = HashMap::new();
        let mut train = Vec::new();
        let mut held = Vec::new();
        let mut skipped = 0;
        for item in &items {
            let vp = if branch == Branch::Vertical { item.vertical } else { item.horizontal };
            if item.split == Split::Test {
                held.push((&item.image, vp));
                continue;
            }
            let frame = frame_for(&mut frames, &spec, &item.image)?;
            match make_target(&frame, vp) {
                Ok(t) => train.push(TrainSample { input: Tensor::from_image(&item.image), target: t.map }),
                Err(Error::UnrepresentableTarget(_)) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if train.is_empty() {
            return Err(CliError::Numeric(format!("no {} target fits the output grid", branch.name())));
        }
        let initial = Network::init(spec.clone(), branch_seed(cfg.seed, branch));
        let initial_loss = dataset_loss(&initial, &train, cfg.train.normalize_loss)?;
        let untrained_error_deg = mean_error(&initial, &held)?;

        let ck_path: PathBuf = out.join(ck_name);
        let resumed = if resume { load_resume(&ck_path, &spec, cfg)? } else { None };
        let resumed_from_epoch = resumed.as_ref().map(|t| t.epoch);
        let mut trainer = match resumed {
            Some(t) => t,
            None => Trainer::new(initial, cfg.train_config())?,
        };
        let name = branch.name().to_string();
        log.retain(|r| r.branch != name || r.epoch < trainer.epoch);
        while trainer.epoch < cfg.train.epochs {
            let loss = match trainer.run_epoch(&train) {
                Ok(l) => l,
                Err(e @ Error::Divergence { .. }) => {
                    write_log(&log_path, &log)?;
                    return Err(CliError::Numeric(format!("{e}; last good checkpoint kept at {}", ck_path.display())));
                }
                Err(e) => return Err(e.into()),
            };
            log.push(LossRow { branch: name.clone(), epoch: trainer.epoch - 1, loss });
            if trainer.epoch % cfg.train.checkpoint_every == 0 || trainer.epoch == cfg.train.epochs {
                save_checkpoint(&ck_path, &trainer, cfg)?;
                write_log(&log_path, &log)?;
            }
        }
        if resumed_from_epoch.is_none() && cfg.train.epochs == 0 {
            save_checkpoint(&ck_path, &trainer, cfg)?;
        }
        write_log(&log_path, &log)?;
        let final_loss = dataset_loss(&trainer.net, &train, cfg.train.normalize_loss)?;
        if !final_loss.is_finite() {
            return Err(CliError::Numeric(format!("{} branch ended with a non-finite loss", branch.name())));
        }
        branches.push(BranchReport {
            branch,
            train_samples: train.len(),
            heldout_samples: held.len(),
            skipped,
            epochs: trainer.epoch,
            resumed_from_epoch,
            initial_loss,
            final_loss,
            untrained_error_deg,
            trained_error_deg: mean_error(&trainer.net, &held)?,
            checkpoint: ck_name.into(),
        });
    }
    let report = TrainReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        dataset: data.display().to_string(),
        dropped_outside: ds.dropped_outside,
        branches,
        config: cfg.clone(),
    };
    write_json(&out.join(REPORT_NAME), &report)?;
    Ok(report)
}
