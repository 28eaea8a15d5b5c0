//! Backward value iteration for the stopping problem. For each stage k
//! (features already seen) and each grid point, the table holds the optimal
//! expected remaining cost: either declare now and pay the Bayes risk, or
//! pay for the next feature and recurse on the updated belief. At run time
//! the same one-step lookahead, evaluated at the exact (unprojected)
//! posterior, decides whether to stop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FeatureOrder, LikelihoodTable};
use crate::grid::SimplexGrid;
use crate::probability::{bayes_decide_raw, CostModel, Posterior, EVIDENCE_FLOOR};

/// Expected-remaining-cost tables, one layer per stage (layer K is the pure
/// Bayes risk at the horizon). Stored with the grid resolution so the grid
/// itself can be rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    resolution: u32,
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn from_parts(resolution: u32, values: Vec<Vec<f64>>) -> Result<ValueTable> {
        if resolution == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        let Some(first) = values.first() else {
            return Err(Error::DimensionMismatch("value table has no layers".into()));
        };
        if first.is_empty() {
            return Err(Error::DimensionMismatch("value table layer is empty".into()));
        }
        for layer in &values {
            if layer.len() != first.len() {
                return Err(Error::DimensionMismatch(format!(
                    "value table layers differ in size: {} vs {}",
                    layer.len(),
                    first.len()
                )));
            }
            if let Some(bad) = layer.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::DimensionMismatch(format!(
                    "value table entry {bad} is not a cost"
                )));
            }
        }
        Ok(ValueTable { resolution, values })
    }

    /// Number of observation stages (layers minus the terminal one).
    pub fn n_stages(&self) -> usize {
        self.values.len() - 1
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn layer(&self, stage: usize) -> &[f64] {
        &self.values[stage]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Expected cost of buying the feature at `stage` and acting optimally
/// afterwards: the feature's cost plus the predictive-weighted value of the
/// updated belief under `next_layer`. Bins the belief says are impossible
/// contribute nothing.
pub fn continuation_cost(
    probs: &[f64],
    stage: usize,
    next_layer: &[f64],
    grid: &SimplexGrid,
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
) -> f64 {
    let feature = order.feature_at(stage);
    let n = probs.len();
    let mut total = costs.feature_cost(feature);
    let mut post = vec![0.0; n];
    for v in 0..lik.n_bins() {
        let col = lik.column(feature, v);
        let pred: f64 = (0..n).map(|i| probs[i] * col[i]).sum();
        if pred <= EVIDENCE_FLOOR {
            continue;
        }
        for i in 0..n {
            post[i] = probs[i] * col[i] / pred;
        }
        total += pred * next_layer[grid.project_raw(&post)];
    }
    total
}

/// Fills the value table by backward induction, one layer per stage, with
/// the Bayes risk as the terminal layer.
pub fn solve_dp(
    grid: &SimplexGrid,
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
) -> ValueTable {
    assert_eq!(grid.n_classes(), lik.n_classes(), "class count mismatch");
    assert_eq!(costs.n_classes(), lik.n_classes(), "class count mismatch");
    assert_eq!(order.n_features(), lik.n_features(), "feature count mismatch");
    assert_eq!(costs.n_features(), lik.n_features(), "feature count mismatch");

    let horizon = order.n_features();
    let fractions: Vec<Vec<f64>> = (0..grid.len()).map(|p| grid.fractions(p)).collect();
    let stop_risk: Vec<f64> = fractions
        .par_iter()
        .map(|pi| bayes_decide_raw(pi, costs).0)
        .collect();

    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = stop_risk.clone();
    for stage in (0..horizon).rev() {
        let next = std::mem::take(&mut values[stage + 1]);
        values[stage] = fractions
            .par_iter()
            .zip(&stop_risk)
            .map(|(pi, &stop)| {
                stop.min(continuation_cost(pi, stage, &next, grid, lik, order, costs))
            })
            .collect();
        values[stage + 1] = next;
    }
    ValueTable {
        resolution: grid.resolution(),
        values,
    }
}

/// What the optimal policy does with belief `pi` after `stage` observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    /// Bayes risk of declaring right now.
    pub stop_risk: f64,
    /// Risk-minimizing class at this belief.
    pub best_class: usize,
    /// Expected cost of one more observation; `None` at the horizon.
    pub continue_cost: Option<f64>,
    pub stop: bool,
}

/// One-step lookahead at the exact posterior: stop as soon as declaring is
/// no worse than continuing (ties stop).
pub fn etana_step(
    pi: &Posterior,
    stage: usize,
    table: &ValueTable,
    grid: &SimplexGrid,
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
) -> StepChoice {
    let (stop_risk, best_class) = bayes_decide_raw(pi.probs(), costs);
    if stage >= table.n_stages() {
        return StepChoice {
            stop_risk,
            best_class,
            continue_cost: None,
            stop: true,
        };
    }
    let cont = continuation_cost(
        pi.probs(),
        stage,
        table.layer(stage + 1),
        grid,
        lik,
        order,
        costs,
    );
    StepChoice {
        stop_risk,
        best_class,
        continue_cost: Some(cont),
        stop: stop_risk <= cont,
    }
}
