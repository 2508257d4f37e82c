//! Run configuration: built-in defaults, overlaid by a JSON file, overlaid
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use ntt_core::losses::{LossWeights, TextureLossConfig};
use ntt_core::{Error, NetworkConfig, SwapConfig, TransferConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lr: Option<PathBuf>,
    pub refs: Vec<PathBuf>,
    pub hr: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub swap: SwapConfig,
    pub transfer: TransferConfig,
    pub texture: TextureLossConfig,
    pub loss_weights: LossWeights,
    /// Feature network; VGG19 through relu5_1 when absent.
    pub network: Option<NetworkConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lr: None,
            refs: Vec::new(),
            hr: None,
            weights: None,
            out: None,
            seed: 0,
            swap: SwapConfig::default(),
            transfer: TransferConfig::default(),
            texture: TextureLossConfig::default(),
            loss_weights: LossWeights::default(),
            network: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn network(&self) -> NetworkConfig {
        self.network.clone().unwrap_or_else(NetworkConfig::vgg19)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), Error> {
        self.transfer.validate()?;
        if self.swap.target_layers.len() != self.transfer.levels {
            return Err(Error::Config(format!(
                "{} swap target layers but {} transfer levels",
                self.swap.target_layers.len(),
                self.transfer.levels
            )));
        }
        if self.transfer.upscale() != self.swap.sr_factor as usize {
            return Err(Error::Config(format!(
                "transfer network upscales {}x but the SR factor is {}",
                self.transfer.upscale(),
                self.swap.sr_factor
            )));
        }
        Ok(())
    }
}
