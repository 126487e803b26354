use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::{LabelSet, PartyDataset, Standardization};
use super::protocol::{TrainConfig, TrainResult};
use super::FedError;

pub const FEDLR_CONFIG_SCHEMA: &str = "finpriv/fedlr-config/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyFile {
    pub id: String,
    /// CSV with a header row; relative paths resolve against the config file.
    pub features: PathBuf,
}

/// The `fedlr train --config` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "$schema", default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub parties: Vec<PartyFile>,
    /// One-column CSV held by the FIU.
    pub labels: PathBuf,
    pub training: TrainConfig,
}

#[derive(Serialize)]
struct PartyWeights<'a> {
    party: &'a str,
    columns: &'a [String],
    weights: &'a [f64],
    /// Weights apply to `(x - mean) / std` of each raw column.
    standardization: &'a Standardization,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, FedError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FedError::Config(e.to_string()))?;
        if let Some(s) = &cfg.schema {
            if s != FEDLR_CONFIG_SCHEMA {
                return Err(FedError::Config(format!("unsupported schema {s:?}")));
            }
        }
        cfg.training.validate()?;
        Ok(cfg)
    }

    /// Reads every party's features and standardizes them, then reads the labels.
    pub fn load_data(&self, base: &Path) -> Result<(Vec<PartyDataset>, Vec<Standardization>, LabelSet), FedError> {
        let open = |p: &Path| {
            let path = base.join(p);
            File::open(&path).map_err(|e| FedError::Data(format!("{}: {e}", path.display())))
        };
        let mut parties = Vec::new();
        let mut scales = Vec::new();
        for pf in &self.parties {
            let mut d = PartyDataset::from_csv(&pf.id, open(&pf.features)?)?;
            scales.push(d.standardize()?);
            parties.push(d);
        }
        let labels = LabelSet::from_csv(open(&self.labels)?)?;
        Ok((parties, scales, labels))
    }
}

/// Per-party weights with their column names and standardization.
pub fn weights_json(parties: &[PartyDataset], scales: &[Standardization], result: &TrainResult) -> String {
    let out: Vec<PartyWeights> = parties
        .iter()
        .zip(scales)
        .zip(&result.weights)
        .map(|((p, s), w)| PartyWeights {
            party: &p.party,
            columns: &p.columns,
            weights: &w.weights,
            standardization: s,
        })
        .collect();
    serde_json::to_string_pretty(&out).expect("weights serialize")
}

pub fn loss_csv(result: &TrainResult) -> String {
    let mut out = String::from("iteration,mse\n");
    for (t, l) in result.loss.iter().enumerate() {
        out.push_str(&format!("{t},{l}\n"));
    }
    out
}
