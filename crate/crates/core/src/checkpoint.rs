//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Network, NetworkDocument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointDocument {
    epoch: usize,
    network: NetworkDocument,
}

/// A network together with the epoch it was saved at.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub network: Network,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CheckpointDocument {
            epoch: self.epoch,
            network: self.network.to_document(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CheckpointDocument = serde_json::from_str(s)?;
        Ok(Checkpoint {
            epoch: doc.epoch,
            network: Network::from_document(doc.network)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Checkpoint::from_json(&text)
    }

    pub fn file_name(epoch: usize) -> String {
        format!("epoch_{epoch:06}.json")
    }
}
