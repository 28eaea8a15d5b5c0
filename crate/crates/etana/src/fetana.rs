//! The fast linear-threshold stopping policy. Instead of a value table it
//! keeps, per candidate decision j and per stage, a hyperplane θ over the
//! belief simplex: classification stops once the hyperplane of the current
//! best choice goes non-positive at the posterior. The hyperplanes are
//! trained by simultaneous-perturbation stochastic approximation (SPSA) on
//! the empirical run cost.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{BinnedData, FeatureOrder, LikelihoodTable};
use crate::probability::{bayes_decide_raw, CostModel, Posterior, EVIDENCE_FLOOR};
use crate::solver::StepChoice;

/// Per-choice, per-stage hyperplane coefficients, flat as (choice, stage,
/// class) with the class axis contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    theta: Vec<f64>,
    n_classes: usize,
    n_stages: usize,
}

impl ThresholdSet {
    /// The always-continue start: every hyperplane strictly positive on the
    /// whole simplex.
    pub fn all_ones(n_classes: usize, n_stages: usize) -> ThresholdSet {
        ThresholdSet {
            theta: vec![1.0; n_classes * n_stages * n_classes],
            n_classes,
            n_stages,
        }
    }

    pub fn from_parts(n_classes: usize, n_stages: usize, theta: Vec<f64>) -> Result<ThresholdSet> {
        if theta.len() != n_classes * n_stages * n_classes {
            return Err(Error::DimensionMismatch(format!(
                "{} threshold entries, expected {}",
                theta.len(),
                n_classes * n_stages * n_classes
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch(
                "thresholds must be finite".into(),
            ));
        }
        Ok(ThresholdSet {
            theta,
            n_classes,
            n_stages,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    /// Hyperplane consulted for choice `j` after `stage` observations.
    pub fn stage(&self, j: usize, stage: usize) -> &[f64] {
        let start = (j * self.n_stages + stage) * self.n_classes;
        &self.theta[start..start + self.n_classes]
    }

    /// The full stage-by-class block for one choice.
    pub fn choice(&self, j: usize) -> &[f64] {
        let block = self.n_stages * self.n_classes;
        &self.theta[j * block..(j + 1) * block]
    }

    pub fn raw(&self) -> &[f64] {
        &self.theta
    }
}

/// SPSA step-size and perturbation schedules with their stopping knobs.
/// Gains decay as epsilon*(t+1+varsigma)^-kappa and perturbations as
/// mu*(t+1)^-upsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaSchedule {
    pub epsilon: f64,
    pub varsigma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub upsilon: f64,
    pub t_max: u64,
    pub grad_tol: f64,
}

impl Default for SpsaSchedule {
    fn default() -> Self {
        SpsaSchedule {
            epsilon: 0.1,
            varsigma: 10.0,
            kappa: 0.602,
            mu: 0.05,
            upsilon: 0.51,
            t_max: 100_000,
            grad_tol: 1e-5,
        }
    }
}

impl SpsaSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok_kappa = self.kappa > 0.5 && self.kappa <= 1.0;
        let ok_upsilon = self.upsilon > 0.5 && self.upsilon <= 1.0;
        if !ok_kappa || !ok_upsilon {
            return Err(Error::Config(
                "decay exponents must lie in (0.5, 1]".into(),
            ));
        }
        if !(self.epsilon > 0.0) || !(self.varsigma > 0.0) || !(self.mu > 0.0) {
            return Err(Error::Config(
                "gain and perturbation scales must be positive".into(),
            ));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::Config("gradient tolerance must be >= 0".into()));
        }
        Ok(())
    }

    /// Step size at iteration t.
    pub fn gain(&self, t: u64) -> f64 {
        self.epsilon * (t as f64 + 1.0 + self.varsigma).powf(-self.kappa)
    }

    /// Perturbation radius at iteration t.
    pub fn perturbation(&self, t: u64) -> f64 {
        self.mu * (t as f64 + 1.0).powf(-self.upsilon)
    }
}

/// Training sets at most this large are averaged in full on every SPSA
/// evaluation; larger ones are subsampled per iteration.
pub const FULL_BATCH_LIMIT: usize = 5_000;
/// Per-iteration sample size for large training sets.
pub const SAMPLED_BATCH: usize = 512;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cost of one run of the threshold rule on one instance, charged as if the
/// final declaration were choice `j`: while the stage hyperplane is
/// non-negative at the belief (and features remain), the next feature in
/// order is bought and the belief updated; on exit the misclassification
/// risk of declaring `j` is added. A missing value still costs its fee but
/// leaves the belief unchanged, as does a bin the belief rules out.
pub fn run_cost(
    choice_thresholds: &[f64],
    j: usize,
    row: &[Option<u16>],
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
    priors: &Posterior,
) -> f64 {
    let n = priors.len();
    let horizon = order.n_features();
    debug_assert_eq!(choice_thresholds.len(), horizon * n);
    let mut pi: Vec<f64> = priors.probs().to_vec();
    let mut total = 0.0;
    let mut k = 0;
    while k < horizon && dot(&choice_thresholds[k * n..(k + 1) * n], &pi) >= 0.0 {
        let f = order.feature_at(k);
        total += costs.feature_cost(f);
        if let Some(bin) = row[f] {
            let col = lik.column(f, bin as usize);
            let pred = dot(&pi, col);
            if pred > EVIDENCE_FLOOR {
                for (p, &l) in pi.iter_mut().zip(col) {
                    *p = *p * l / pred;
                }
            }
        }
        k += 1;
    }
    total + costs.decision_risk_raw(&pi, j)
}

/// Mean run cost over a batch of training rows.
pub fn mean_run_cost(
    choice_thresholds: &[f64],
    j: usize,
    binned: &BinnedData,
    batch: &[usize],
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
    priors: &Posterior,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = batch
        .iter()
        .map(|&r| run_cost(choice_thresholds, j, binned.row(r), lik, order, costs, priors))
        .sum();
    Ok(sum / batch.len() as f64)
}

/// Two-sided finite difference along one random ±1 direction:
/// [f(θ+βα) − f(θ−βα)] / (2β) · α.
pub fn spsa_gradient_with_direction<F>(mut f: F, theta: &[f64], beta: f64, alpha: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    debug_assert_eq!(theta.len(), alpha.len());
    let plus: Vec<f64> = theta.iter().zip(alpha).map(|(t, a)| t + beta * a).collect();
    let minus: Vec<f64> = theta.iter().zip(alpha).map(|(t, a)| t - beta * a).collect();
    let scale = (f(&plus) - f(&minus)) / (2.0 * beta);
    alpha.iter().map(|a| scale * a).collect()
}

/// Draws the ±1 direction from `rng` and estimates the gradient of `f` at
/// `theta` with the iteration-t perturbation radius.
pub fn spsa_gradient_of<F>(
    f: F,
    theta: &[f64],
    t: u64,
    sched: &SpsaSchedule,
    rng: &mut impl Rng,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let alpha: Vec<f64> = (0..theta.len())
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    spsa_gradient_with_direction(f, theta, sched.perturbation(t), &alpha)
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trains one choice's stage-by-class block. The batch for both sides of
/// each finite difference is drawn once per iteration (common random
/// numbers); convergence is checked before the parameter update so a loose
/// tolerance returns the initial point untouched.
fn train_choice(
    j: usize,
    init: &[f64],
    binned: &BinnedData,
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
    priors: &Posterior,
    sched: &SpsaSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let s = binned.n_instances();
    let full: Vec<usize> = (0..s).collect();
    let mut theta = init.to_vec();
    for t in 0..sched.t_max {
        let batch: Vec<usize> = if s <= FULL_BATCH_LIMIT {
            full.clone()
        } else {
            (0..SAMPLED_BATCH).map(|_| rng.gen_range(0..s)).collect()
        };
        let eval = |th: &[f64]| {
            mean_run_cost(th, j, binned, &batch, lik, order, costs, priors)
                .expect("batch is non-empty")
        };
        let grad = spsa_gradient_of(eval, &theta, t, sched, rng);
        if l2_norm(&grad) <= sched.grad_tol {
            break;
        }
        let a = sched.gain(t);
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= a * g;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergenceDetected { iteration: t });
        }
    }
    Ok(theta)
}

/// Trains all N per-choice threshold blocks independently (in parallel,
/// each on its own deterministic random stream derived from `seed`).
pub fn train_thresholds(
    binned: &BinnedData,
    lik: &LikelihoodTable,
    order: &FeatureOrder,
    costs: &CostModel,
    priors: &Posterior,
    sched: &SpsaSchedule,
    init: &ThresholdSet,
    seed: u64,
) -> Result<ThresholdSet> {
    sched.validate()?;
    let n = lik.n_classes();
    let horizon = order.n_features();
    if init.n_classes() != n || init.n_stages() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "initial thresholds are {}x{}, model needs {}x{}",
            init.n_classes(),
            init.n_stages(),
            n,
            horizon
        )));
    }
    if binned.n_instances() == 0 {
        return Err(Error::EmptyBatch);
    }

    let blocks: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let trained = train_choice(
                j,
                init.choice(j),
                binned,
                lik,
                order,
                costs,
                priors,
                sched,
                &mut rng,
            )?;
            // Monitored descent guarantee: on the full training set the
            // trained block should not cost more than where it started.
            let full: Vec<usize> = (0..binned.n_instances()).collect();
            let before =
                mean_run_cost(init.choice(j), j, binned, &full, lik, order, costs, priors)?;
            let after = mean_run_cost(&trained, j, binned, &full, lik, order, costs, priors)?;
            debug_assert!(
                after <= before + 1e-6,
                "training worsened choice {j}: {before} -> {after}"
            );
            Ok(trained)
        })
        .collect();

    let theta: Vec<f64> = blocks?.into_iter().flatten().collect();
    ThresholdSet::from_parts(n, horizon, theta)
}

/// Threshold rule at the exact posterior: find the Bayes-best choice, stop
/// if its stage hyperplane is non-positive there (or features ran out).
pub fn fetana_step(pi: &Posterior, stage: usize, ts: &ThresholdSet, cm: &CostModel) -> StepChoice {
    let (stop_risk, best_class) = bayes_decide_raw(pi.probs(), cm);
    let stop =
        stage >= ts.n_stages() || dot(ts.stage(best_class, stage), pi.probs()) <= 0.0;
    StepChoice {
        stop_risk,
        best_class,
        continue_cost: None,
        stop,
    }
}
