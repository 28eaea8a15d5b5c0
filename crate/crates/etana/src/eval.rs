//! Train/validate harness: fits the model on a training portion, classifies
//! a held-out portion, and reports accuracy, mean feature usage, and wall
//! times, either on a provided split or with seeded k-fold cross-validation.
//! Sweeps rerun the same protocol across fee or bin-count values.

use std::time::Instant;

use serde::Serialize;

use crate::dataset::{make_folds, Dataset};
use crate::error::{Error, Result};
use crate::estimation::{estimate_priors, order_features, LikelihoodTable, Quantizer};
use crate::fetana::{train_thresholds, SpsaSchedule, ThresholdSet};
use crate::grid::{default_resolution, SimplexGrid};
use crate::probability::CostModel;
use crate::runtime::{classify_batch, Policy, TrainedModel};
use crate::solver::solve_dp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Etana,
    Fetana,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Etana => "etana",
            PolicyKind::Fetana => "fetana",
        }
    }
}

/// Where the cost structure comes from: a single per-feature fee with 0-1
/// misclassification costs, or explicit vectors.
#[derive(Debug, Clone)]
pub enum CostSpec {
    Uniform(f64),
    Explicit {
        feature_costs: Vec<f64>,
        misclass: Option<Vec<Vec<f64>>>,
    },
}

impl CostSpec {
    pub fn build(&self, n_classes: usize, n_features: usize) -> Result<CostModel> {
        match self {
            CostSpec::Uniform(c) => CostModel::uniform(n_classes, n_features, *c),
            CostSpec::Explicit { feature_costs, misclass } => {
                if feature_costs.len() != n_features {
                    return Err(Error::Config(format!(
                        "cost file lists {} feature fees, dataset has {n_features} features",
                        feature_costs.len()
                    )));
                }
                let m = misclass.clone().unwrap_or_else(|| {
                    (0..n_classes)
                        .map(|i| {
                            (0..n_classes)
                                .map(|j| if i == j { 0.0 } else { 1.0 })
                                .collect()
                        })
                        .collect()
                });
                CostModel::new(feature_costs.clone(), m)
            }
        }
    }

    /// The scalar fee when uniform, for report echoes.
    pub fn uniform_fee(&self) -> Option<f64> {
        match self {
            CostSpec::Uniform(c) => Some(*c),
            CostSpec::Explicit { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub policy: PolicyKind,
    pub costs: CostSpec,
    /// Bins per feature; defaults to the number of classes.
    pub n_bins: Option<usize>,
    /// Belief-grid resolution; defaults by class count, coarsened to fit the
    /// bound.
    pub grid_resolution: Option<u32>,
    pub grid_bound: u64,
    pub seed: u64,
    pub spsa: SpsaSchedule,
}

impl EvalConfig {
    pub fn new(policy: PolicyKind, cost: f64) -> EvalConfig {
        EvalConfig {
            policy,
            costs: CostSpec::Uniform(cost),
            n_bins: None,
            grid_resolution: None,
            grid_bound: crate::grid::DEFAULT_GRID_BOUND,
            seed: 0,
            spsa: SpsaSchedule::default(),
        }
    }

    fn resolve_bins(&self, n_classes: usize) -> Result<usize> {
        let v = self.n_bins.unwrap_or(n_classes);
        if v < 2 {
            return Err(Error::Config(format!(
                "need at least 2 bins per feature, got {v}"
            )));
        }
        Ok(v)
    }

    fn resolve_grid(&self, n_classes: usize) -> u32 {
        self.grid_resolution
            .unwrap_or_else(|| default_resolution(n_classes, self.grid_bound))
    }
}

/// How the validation portion is chosen.
#[derive(Debug, Clone)]
pub enum SplitPlan {
    /// A separate dataset; its labels are aligned to the training labels by
    /// name.
    Provided(Dataset),
    KFold { folds: usize },
}

/// Fits the full model (quantizer, likelihoods, priors, order, policy) on a
/// training set. Returns the model and the fit wall time in seconds.
pub fn fit_model(train: &Dataset, config: &EvalConfig) -> Result<(TrainedModel, f64)> {
    let n = train.n_classes();
    if n < 2 {
        return Err(Error::Config(format!(
            "training data has {n} distinct class(es); need at least 2"
        )));
    }
    if train.n_instances() == 0 {
        return Err(Error::EmptyDataset);
    }
    let v = config.resolve_bins(n)?;
    let k = train.n_features();
    let costs = config.costs.build(n, k)?;
    config.spsa.validate()?;

    let start = Instant::now();
    let quantizer = Quantizer::fit(train, v);
    let binned = quantizer.apply(train);
    let likelihoods = LikelihoodTable::estimate(&binned, train.labels(), n, v);
    let priors = estimate_priors(train.labels(), n)?;
    let order = order_features(
        &likelihoods,
        &priors,
        &binned,
        train.labels(),
        costs.feature_costs(),
    );
    let policy = match config.policy {
        PolicyKind::Etana => {
            let grid = SimplexGrid::build(n, config.resolve_grid(n), config.grid_bound)?;
            let table = solve_dp(&grid, &likelihoods, &order, &costs);
            Policy::Optimal { table, grid }
        }
        PolicyKind::Fetana => {
            let init = ThresholdSet::all_ones(n, k);
            let thresholds = train_thresholds(
                &binned,
                &likelihoods,
                &order,
                &costs,
                &priors,
                &config.spsa,
                &init,
                config.seed,
            )?;
            Policy::Threshold {
                thresholds,
                schedule: config.spsa.clone(),
                seed: config.seed,
            }
        }
    };
    let train_time_s = start.elapsed().as_secs_f64();

    let model = TrainedModel {
        priors,
        quantizer,
        likelihoods,
        order,
        costs,
        policy,
        label_names: train.label_names().to_vec(),
    };
    model.validate()?;
    Ok((model, train_time_s))
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_instances: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub mean_features: f64,
    pub train_time_s: f64,
    pub classify_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub policy: String,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_per_feature: Option<f64>,
    pub seed: u64,
    pub n_instances: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub mean_features: f64,
    pub train_time_s: f64,
    pub classify_time_s: f64,
    pub folds: Vec<FoldReport>,
}

fn eval_one_split(
    fold: usize,
    train: &Dataset,
    valid: &Dataset,
    config: &EvalConfig,
) -> Result<(FoldReport, usize)> {
    if valid.n_features() != train.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "validation data has {} features, training data {}",
            valid.n_features(),
            train.n_features()
        )));
    }
    let (model, train_time_s) = fit_model(train, config)?;
    let outcome = classify_batch(valid, &model)?;
    let n_correct = outcome
        .results
        .iter()
        .zip(valid.labels())
        .filter(|(r, &truth)| r.label == truth)
        .count();
    let features_total: usize = outcome.results.iter().map(|r| r.features_used).sum();
    Ok((
        FoldReport {
            fold,
            n_instances: valid.n_instances(),
            n_correct,
            accuracy: n_correct as f64 / valid.n_instances() as f64,
            mean_features: outcome.mean_features,
            train_time_s,
            classify_time_s: outcome.elapsed.as_secs_f64(),
        },
        features_total,
    ))
}

/// Runs the full protocol and aggregates over folds by pooling instances:
/// accuracy is total correct over total classified.
pub fn run_eval(train: &Dataset, plan: &SplitPlan, config: &EvalConfig) -> Result<EvalReport> {
    let mut folds = Vec::new();
    let mut features_total = 0usize;
    match plan {
        SplitPlan::Provided(valid) => {
            let mut valid = valid.clone();
            valid.remap_labels_to(train.label_names())?;
            let (report, ft) = eval_one_split(1, train, &valid, config)?;
            features_total += ft;
            folds.push(report);
        }
        SplitPlan::KFold { folds: k } => {
            for (i, (tr_idx, va_idx)) in
                make_folds(train.n_instances(), *k, config.seed)?.iter().enumerate()
            {
                let tr = train.subset(tr_idx);
                let va = train.subset(va_idx);
                let (report, ft) = eval_one_split(i + 1, &tr, &va, config)?;
                features_total += ft;
                folds.push(report);
            }
        }
    }
    let n_instances: usize = folds.iter().map(|f| f.n_instances).sum();
    let n_correct: usize = folds.iter().map(|f| f.n_correct).sum();
    Ok(EvalReport {
        policy: config.policy.name().to_string(),
        n_classes: train.n_classes(),
        n_features: train.n_features(),
        n_bins: config.resolve_bins(train.n_classes())?,
        grid_resolution: match config.policy {
            PolicyKind::Etana => Some(config.resolve_grid(train.n_classes())),
            PolicyKind::Fetana => None,
        },
        cost_per_feature: config.costs.uniform_fee(),
        seed: config.seed,
        n_instances,
        n_correct,
        accuracy: n_correct as f64 / n_instances as f64,
        mean_features: features_total as f64 / n_instances as f64,
        train_time_s: folds.iter().map(|f| f.train_time_s).sum(),
        classify_time_s: folds.iter().map(|f| f.classify_time_s).sum(),
        folds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub param: f64,
    pub accuracy: f64,
    pub mean_features: f64,
    pub train_time_s: f64,
}

impl SweepPoint {
    fn from_report(param: f64, r: &EvalReport) -> SweepPoint {
        SweepPoint {
            param,
            accuracy: r.accuracy,
            mean_features: r.mean_features,
            train_time_s: r.train_time_s,
        }
    }
}

/// One full evaluation per fee value, sharing folds and seeds.
pub fn cost_sweep(
    train: &Dataset,
    plan: &SplitPlan,
    config: &EvalConfig,
    fees: &[f64],
) -> Result<Vec<SweepPoint>> {
    fees.iter()
        .map(|&c| {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("fee {c} must be nonnegative")));
            }
            let mut cfg = config.clone();
            cfg.costs = CostSpec::Uniform(c);
            Ok(SweepPoint::from_report(c, &run_eval(train, plan, &cfg)?))
        })
        .collect()
}

/// One full evaluation per bin count, sharing folds and seeds.
pub fn bin_sweep(
    train: &Dataset,
    plan: &SplitPlan,
    config: &EvalConfig,
    bins: &[usize],
) -> Result<Vec<SweepPoint>> {
    bins.iter()
        .map(|&v| {
            let mut cfg = config.clone();
            cfg.n_bins = Some(v);
            Ok(SweepPoint::from_report(
                v as f64,
                &run_eval(train, plan, &cfg)?,
            ))
        })
        .collect()
}

/// CSV form of a sweep curve.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("param,accuracy,mean_features,train_time_s\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.param, p.accuracy, p.mean_features, p.train_time_s
        ));
    }
    out
}

/// Aligned human-readable form of a report.
pub fn report_text(r: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("policy          {}\n", r.policy));
    out.push_str(&format!("classes         {}\n", r.n_classes));
    out.push_str(&format!("features        {}\n", r.n_features));
    out.push_str(&format!("bins            {}\n", r.n_bins));
    if let Some(g) = r.grid_resolution {
        out.push_str(&format!("grid resolution {g}\n"));
    }
    if let Some(c) = r.cost_per_feature {
        out.push_str(&format!("cost/feature    {c}\n"));
    }
    out.push_str(&format!("seed            {}\n", r.seed));
    out.push_str(&format!(
        "accuracy        {:.4} ({}/{})\n",
        r.accuracy, r.n_correct, r.n_instances
    ));
    out.push_str(&format!("mean features   {:.2}\n", r.mean_features));
    out.push_str(&format!("train time      {:.3} s\n", r.train_time_s));
    out.push_str(&format!("classify time   {:.3} s\n", r.classify_time_s));
    if r.folds.len() > 1 {
        out.push_str("fold  instances  correct  accuracy  mean_feat  train_s  classify_s\n");
        for f in &r.folds {
            out.push_str(&format!(
                "{:>4}  {:>9}  {:>7}  {:>8.4}  {:>9.2}  {:>7.3}  {:>10.3}\n",
                f.fold, f.n_instances, f.n_correct, f.accuracy, f.mean_features, f.train_time_s,
                f.classify_time_s
            ));
        }
    }
    out
}
