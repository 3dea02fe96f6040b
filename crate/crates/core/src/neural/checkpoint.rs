use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, NeuralError};

pub const CHECKPOINT_VERSION: &str = "pdlab-mlp/1";

/// Named networks plus a format tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub networks: BTreeMap<String, Mlp>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint { version: CHECKPOINT_VERSION.to_string(), networks: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, net: &Mlp) {
        self.networks.insert(name.into(), net.clone());
    }

    pub fn take(&mut self, name: &str) -> Result<Mlp, NeuralError> {
        self.networks.remove(name).ok_or_else(|| NeuralError::Checkpoint(format!("missing network {name}")))
    }
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> std::io::Result<()> {
    let text = serde_json::to_string(ckpt).map_err(std::io::Error::other)?;
    std::fs::write(path, text)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NeuralError> {
    let text = std::fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {}", ckpt.version)));
    }
    for (name, net) in &ckpt.networks {
        let ok = net.weights.len() + 1 == net.dims.len()
            && net.weights.iter().enumerate().all(|(l, w)| w.dim() == (net.dims[l], net.dims[l + 1]))
            && net.biases.iter().enumerate().all(|(l, b)| b.len() == net.dims[l + 1]);
        if !ok {
            return Err(NeuralError::Checkpoint(format!("network {name} has inconsistent shapes")));
        }
    }
    Ok(ckpt)
}
