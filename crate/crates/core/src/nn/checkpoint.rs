//! JSON weight checkpoints.
//!
//! Layout (`version` 1):
//!
//! ```text
//! {
//!   "format": "houghvp-checkpoint",
//!   "version": 1,
//!   "branch": "vertical" | "horizontal",
//!   "layers": [ { "kind": "conv", "in_channels": 1, "filters": 12,
//!                 "kernel": [5, 5], "stride": [1, 1] },
//!               { "kind": "relu" }, { "kind": "fht", "space": "H12" }, ... ],
//!   "seed": 7,
//!   "epoch": 12,
//!   "weights": [[...], ...],      // one array per conv, [filter][channel][ky][kx]
//!   "velocity": [[...], ...],     // optimizer momentum buffers, may be empty
//!   "config": { ... }             // free-form run configuration
//! }
//! ```
//!
//! Floats are written with shortest round-trip formatting, so a save/load
//! cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Branch;
use crate::nn::net::{LayerSpec, Network, NetworkSpec};

pub const FORMAT: &str = "houghvp-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub branch: Branch,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    pub epoch: usize,
    pub weights: Vec<Vec<f64>>,
    #[serde(default)]
    pub velocity: Vec<Vec<f64>>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn new(net: &Network, seed: u64, epoch: usize) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            branch: net.spec.branch,
            layers: net.spec.layers.clone(),
            seed,
            epoch,
            weights: net.weights.clone(),
            velocity: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn network(&self) -> Result<Network> {
        Network::from_weights(NetworkSpec { branch: self.branch, layers: self.layers.clone() }, self.weights.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag {:?}", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.network()?;
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::{build_network, ArchConfig};

    #[test]
    fn json_round_trip_is_bit_exact() {
        let spec = build_network(Branch::Horizontal, &ArchConfig::compact(2)).unwrap();
        let net = Network::init(spec, 99);
        let mut ck = Checkpoint::new(&net, 99, 3);
        ck.velocity = net.weights.iter().map(|w| w.iter().map(|v| v / 3.0).collect()).collect();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network().unwrap(), net);
    }

    #[test]
    fn rejects_wrong_tag_and_shapes() {
        let spec = build_network(Branch::Vertical, &ArchConfig::compact(2)).unwrap();
        let net = Network::init(spec, 1);
        let mut ck = Checkpoint::new(&net, 1, 0);
        ck.format = "other".into();
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
        let mut ck = Checkpoint::new(&net, 1, 0);
        ck.weights[0].pop();
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
    }
}
