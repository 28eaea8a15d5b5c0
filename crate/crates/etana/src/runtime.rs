//! The online classification loop shared by both stopping policies: walk
//! the feature order, update the belief, ask the policy whether to stop,
//! and record a per-stage trace.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimation::{FeatureOrder, LikelihoodTable, Quantizer};
use crate::fetana::{fetana_step, SpsaSchedule, ThresholdSet};
use crate::grid::SimplexGrid;
use crate::probability::{update_posterior, CostModel, Posterior};
use crate::solver::{etana_step, StepChoice, ValueTable};

/// Stopping policy, tagged by kind. The grid for the optimal policy is
/// rebuilt from the table's resolution on load rather than stored.
#[derive(Debug, Clone)]
pub enum Policy {
    Optimal { table: ValueTable, grid: SimplexGrid },
    Threshold { thresholds: ThresholdSet, schedule: SpsaSchedule, seed: u64 },
}

impl Policy {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Policy::Optimal { .. } => "etana",
            Policy::Threshold { .. } => "fetana",
        }
    }
}

/// Everything needed to classify: the fitted probabilistic model, the
/// feature order, the cost structure, and the stopping policy.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub priors: Posterior,
    pub quantizer: Quantizer,
    pub likelihoods: LikelihoodTable,
    pub order: FeatureOrder,
    pub costs: CostModel,
    pub policy: Policy,
    pub label_names: Vec<String>,
}

impl TrainedModel {
    /// Checks that every component agrees on the problem dimensions.
    pub fn validate(&self) -> Result<()> {
        let n = self.priors.len();
        let k = self.likelihoods.n_features();
        let mut problems = Vec::new();
        if self.likelihoods.n_classes() != n {
            problems.push("likelihood classes".to_string());
        }
        if self.costs.n_classes() != n {
            problems.push("cost-matrix classes".to_string());
        }
        if self.label_names.len() != n {
            problems.push("label names".to_string());
        }
        if self.quantizer.n_features() != k {
            problems.push("quantizer features".to_string());
        }
        if self.order.n_features() != k {
            problems.push("order features".to_string());
        }
        if self.costs.n_features() != k {
            problems.push("cost features".to_string());
        }
        if self.quantizer.n_bins() != self.likelihoods.n_bins() {
            problems.push("bin counts".to_string());
        }
        match &self.policy {
            Policy::Optimal { table, grid } => {
                if table.n_stages() != k {
                    problems.push("value-table stages".to_string());
                }
                if grid.n_classes() != n {
                    problems.push("grid classes".to_string());
                }
                if grid.resolution() != table.resolution() {
                    problems.push("grid resolution".to_string());
                }
                if table.layer(0).len() != grid.len() {
                    problems.push("value-table layer size".to_string());
                }
            }
            Policy::Threshold { thresholds, schedule, .. } => {
                if thresholds.n_stages() != k {
                    problems.push("threshold stages".to_string());
                }
                if thresholds.n_classes() != n {
                    problems.push("threshold classes".to_string());
                }
                schedule.validate()?;
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "inconsistent model components: {}",
                problems.join(", ")
            )))
        }
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn n_features(&self) -> usize {
        self.likelihoods.n_features()
    }

    fn step(&self, pi: &Posterior, stage: usize) -> StepChoice {
        match &self.policy {
            Policy::Optimal { table, grid } => etana_step(
                pi,
                stage,
                table,
                grid,
                &self.likelihoods,
                &self.order,
                &self.costs,
            ),
            Policy::Threshold { thresholds, .. } => {
                fetana_step(pi, stage, thresholds, &self.costs)
            }
        }
    }
}

/// What happened at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    /// Features already consumed when this decision was made.
    pub stage: usize,
    /// Belief the decision was made at.
    pub posterior: Vec<f64>,
    /// Bayes risk of declaring at this belief.
    pub stop_risk: f64,
    /// Risk-minimizing class at this belief.
    pub best_class: usize,
    /// One-step lookahead cost where the policy computes one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continue_cost: Option<f64>,
    pub decision: TraceDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceDecision {
    Stop,
    /// The feature bought as a result, and the bin it landed in (`None`
    /// when the value was missing).
    Continue { feature: usize, bin: Option<u16> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub label: usize,
    /// Realized stopping time: how many features were bought.
    pub features_used: usize,
    pub trace: Vec<TraceStep>,
}

/// Runs the sequential loop on one instance given as raw (unquantized)
/// feature values indexed like the training data.
pub fn classify_instance(raw: &[f64], model: &TrainedModel) -> Result<ClassificationResult> {
    let k = model.n_features();
    if raw.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "instance has {} features, model expects {k}",
            raw.len()
        )));
    }
    let mut pi = model.priors.clone();
    let mut trace = Vec::new();
    let mut stage = 0;
    loop {
        let choice = model.step(&pi, stage);
        if choice.stop {
            trace.push(TraceStep {
                stage,
                posterior: pi.probs().to_vec(),
                stop_risk: choice.stop_risk,
                best_class: choice.best_class,
                continue_cost: choice.continue_cost,
                decision: TraceDecision::Stop,
            });
            return Ok(ClassificationResult {
                label: choice.best_class,
                features_used: stage,
                trace,
            });
        }
        let feature = model.order.feature_at(stage);
        let bin = model
            .quantizer
            .quantize(feature, raw[feature])
            .map(|b| b as u16);
        trace.push(TraceStep {
            stage,
            posterior: pi.probs().to_vec(),
            stop_risk: choice.stop_risk,
            best_class: choice.best_class,
            continue_cost: choice.continue_cost,
            decision: TraceDecision::Continue { feature, bin },
        });
        if let Some(b) = bin {
            pi = update_posterior(&pi, model.likelihoods.column(feature, b as usize))?;
        }
        stage += 1;
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub results: Vec<ClassificationResult>,
    pub mean_features: f64,
    pub elapsed: Duration,
}

/// Classifies every instance independently (in parallel), timing only the
/// classification work.
pub fn classify_batch(instances: &Dataset, model: &TrainedModel) -> Result<BatchOutcome> {
    if instances.n_instances() == 0 {
        return Err(Error::EmptyDataset);
    }
    let start = Instant::now();
    let results: Result<Vec<ClassificationResult>> = (0..instances.n_instances())
        .into_par_iter()
        .map(|i| classify_instance(instances.row(i), model))
        .collect();
    let results = results?;
    let elapsed = start.elapsed();
    let mean_features =
        results.iter().map(|r| r.features_used as f64).sum::<f64>() / results.len() as f64;
    Ok(BatchOutcome {
        results,
        mean_features,
        elapsed,
    })
}

/// Mean realized cost over classified instances: the fees of the features
/// each run actually bought plus the misclassification cost of the declared
/// label against the true one.
pub fn empirical_total_cost(
    results: &[ClassificationResult],
    true_labels: &[usize],
    cm: &CostModel,
) -> f64 {
    assert_eq!(results.len(), true_labels.len(), "one label per result");
    assert!(!results.is_empty(), "nothing classified");
    let total: f64 = results
        .iter()
        .zip(true_labels)
        .map(|(r, &truth)| {
            let fees: f64 = r
                .trace
                .iter()
                .filter_map(|s| match s.decision {
                    TraceDecision::Continue { feature, .. } => {
                        Some(cm.feature_cost(feature))
                    }
                    TraceDecision::Stop => None,
                })
                .sum();
            fees + cm.misclass()[truth][r.label]
        })
        .sum();
    total / results.len() as f64
}
