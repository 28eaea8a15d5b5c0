//! Versioned on-disk model format (JSON). Floats are written with the
//! shortest representation that parses back to the identical bits, so a
//! save/load/save cycle is byte-stable. Loading goes through the same
//! validating constructors as training, and the belief grid for the optimal
//! policy is rebuilt from the stored resolution instead of being stored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FeatureOrder, LikelihoodTable, Quantizer};
use crate::fetana::{SpsaSchedule, ThresholdSet};
use crate::grid::SimplexGrid;
use crate::probability::{CostModel, Posterior};
use crate::runtime::{Policy, TrainedModel};
use crate::solver::ValueTable;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyPayload {
    Etana {
        table: ValueTable,
    },
    Fetana {
        thresholds: ThresholdSet,
        schedule: SpsaSchedule,
        seed: u64,
    },
}

/// The serialized form of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_bins: usize,
    pub label_names: Vec<String>,
    pub priors: Vec<f64>,
    pub quantizer: Quantizer,
    pub likelihoods: LikelihoodTable,
    pub order: FeatureOrder,
    pub feature_costs: Vec<f64>,
    pub misclass: Vec<Vec<f64>>,
    pub policy: PolicyPayload,
}

impl ModelFile {
    pub fn from_model(model: &TrainedModel) -> ModelFile {
        let policy = match &model.policy {
            Policy::Optimal { table, .. } => PolicyPayload::Etana { table: table.clone() },
            Policy::Threshold { thresholds, schedule, seed } => PolicyPayload::Fetana {
                thresholds: thresholds.clone(),
                schedule: schedule.clone(),
                seed: *seed,
            },
        };
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            n_classes: model.n_classes(),
            n_features: model.n_features(),
            n_bins: model.likelihoods.n_bins(),
            label_names: model.label_names.clone(),
            priors: model.priors.probs().to_vec(),
            quantizer: model.quantizer.clone(),
            likelihoods: model.likelihoods.clone(),
            order: model.order.clone(),
            feature_costs: model.costs.feature_costs().to_vec(),
            misclass: model.costs.misclass().to_vec(),
            policy,
        }
    }

    pub fn into_model(self) -> Result<TrainedModel> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion {
                got: self.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let priors = Posterior::from_normalized(self.priors)?;
        let costs = CostModel::new(self.feature_costs, self.misclass)?;
        let policy = match self.policy {
            PolicyPayload::Etana { table } => {
                // The grid always fits: it fit when the model was trained.
                let grid = SimplexGrid::build(self.n_classes, table.resolution(), u64::MAX)?;
                Policy::Optimal { table, grid }
            }
            PolicyPayload::Fetana { thresholds, schedule, seed } => Policy::Threshold {
                thresholds,
                schedule,
                seed,
            },
        };
        let model = TrainedModel {
            priors,
            quantizer: self.quantizer,
            likelihoods: self.likelihoods,
            order: self.order,
            costs,
            policy,
            label_names: self.label_names,
        };
        model.validate()?;
        if model.n_classes() != self.n_classes
            || model.n_features() != self.n_features
            || model.likelihoods.n_bins() != self.n_bins
        {
            return Err(Error::DimensionMismatch(
                "declared model dimensions disagree with the stored components".into(),
            ));
        }
        Ok(model)
    }
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile::from_model(model);
    let mut json = serde_json::to_string(&file)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let bytes = fs::read(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)?;
    file.into_model()
}
