//! Run configuration shared by all commands and embedded in every artifact.

use std::path::Path;

use houghvp::nn::{ArchConfig, TrainConfig};
use houghvp::synth::{BundleParams, DocParams};
use houghvp::vp::ClassicalParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    /// Width images are resized to before classical detection; `null` keeps
    /// the native size.
    pub scale_width: Option<usize>,
    /// Size of the rayon pool; `null` lets rayon decide.
    pub threads: Option<usize>,
    pub classical: ClassicalParams,
    pub network: NetworkConfig,
    pub train: TrainSection,
    pub synth: SynthConfig,
    pub rectify: RectifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            scale_width: Some(400),
            threads: None,
            classical: ClassicalParams::default(),
            network: NetworkConfig::default(),
            train: TrainSection::default(),
            synth: SynthConfig::default(),
            rectify: RectifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub arch: Arch,
    /// Width network inputs are resized to, for training and inference.
    pub input_width: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { arch: Arch::Standard, input_width: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    /// The full-size layer table.
    Standard,
    Compact { filters: usize },
    Custom(ArchConfig),
}

impl Arch {
    pub fn build(&self) -> ArchConfig {
        match self {
            Arch::Standard => ArchConfig::standard(),
            Arch::Compact { filters } => ArchConfig::compact(*filters),
            Arch::Custom(a) => a.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch: usize,
    pub normalize_loss: bool,
    /// Write checkpoints every this many epochs (and after the last one).
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { lr: t.lr, momentum: t.momentum, epochs: t.epochs, batch: t.batch, normalize_loss: t.normalize_loss, checkpoint_every: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Document,
    BundlePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub width: usize,
    pub height: usize,
    /// Fraction of samples (taken from the end) marked as the test split.
    pub holdout_fraction: f64,
    /// Fraction of pixels replaced by salt-and-pepper noise.
    pub salt_pepper: f64,
    pub document: DocParams,
    pub bundle: BundleParams,
    /// Inclusive range the per-image line count of a bundle is drawn from.
    pub bundle_lines: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: SynthKind::Document,
            width: 400,
            height: 520,
            holdout_fraction: 0.2,
            salt_pepper: 0.0,
            document: DocParams::default(),
            bundle: BundleParams::default(),
            bundle_lines: (4, 12),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RectifyConfig {
    /// Rectified images larger than this on either side are scaled down.
    pub max_side: usize,
}

impl Default for RectifyConfig {
    fn default() -> Self {
        Self { max_side: 2000 }
    }
}

impl RunConfig {
    /// Reads `path` (or the defaults) and applies a seed override.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Input(format!("config: {m}")));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.scale_width.is_some_and(|w| w < 8) {
            return bad("scale_width must be at least 8".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        let c = &self.classical;
        if !(0.0..=1.0).contains(&c.percentile) || !(c.power.is_finite() && c.power > 0.0) {
            return bad("classical.percentile must be in [0, 1] and classical.power positive".into());
        }
        if self.network.input_width < 8 {
            return bad("network.input_width must be at least 8".into());
        }
        let t = &self.train;
        if !(t.lr.is_finite() && t.lr >= 0.0) || !(0.0..1.0).contains(&t.momentum) || t.batch == 0 || t.checkpoint_every == 0 {
            return bad("train needs lr >= 0, momentum in [0, 1), positive batch and checkpoint_every".into());
        }
        let s = &self.synth;
        if s.width < 8 || s.height < 8 {
            return bad("synth images must be at least 8x8".into());
        }
        if !(0.0..=1.0).contains(&s.holdout_fraction) || !(0.0..=1.0).contains(&s.salt_pepper) {
            return bad("synth.holdout_fraction and synth.salt_pepper must be in [0, 1]".into());
        }
        if s.bundle_lines.0 < 2 || s.bundle_lines.0 > s.bundle_lines.1 {
            return bad("synth.bundle_lines must be an increasing range starting at 2 or more".into());
        }
        if self.rectify.max_side < 8 {
            return bad("rectify.max_side must be at least 8".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig { lr: t.lr, momentum: t.momentum, epochs: t.epochs, batch: t.batch, normalize_loss: t.normalize_loss, seed: self.seed }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 5, "network": {"arch": {"kind": "compact", "filters": 4}}, "classical": {"power": 4.0}}"#)
                .unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.network.arch, Arch::Compact { filters: 4 });
        assert_eq!(cfg.network.input_width, 400);
        assert_eq!(cfg.classical.power, 4.0);
        assert_eq!(cfg.classical.percentile, 0.9);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 5}"#).is_err());
        let cfg = RunConfig { train: TrainSection { batch: 0, ..Default::default() }, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Input(_))));
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig { network: NetworkConfig { arch: Arch::Custom(ArchConfig::compact(3)), input_width: 64 }, ..Default::default() };
        let back: RunConfig = serde_json::from_value(cfg.to_value()).unwrap();
        assert_eq!(back, cfg);
    }
}
