//! Belief arithmetic: posterior recursion, Bayes-risk decisions, and
//! predictive feature probabilities.
//!
//! Everything here is a pure function of its inputs, so concurrent callers
//! need no synchronization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evidence mass at or below this is treated as an impossible observation.
pub const EVIDENCE_FLOOR: f64 = 1e-300;

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability vector over the class labels; the sufficient statistic of the
/// whole feature history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    /// Validates entries (nonnegative, summing to 1 within 1e-9) and
    /// renormalizes so the invariant holds exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DimensionMismatch("posterior must not be empty".into()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::DimensionMismatch(format!(
                    "posterior entry {p} is not a probability"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::DimensionMismatch(format!(
                "posterior sums to {sum}, expected 1"
            )));
        }
        let mut out = Self { probs };
        out.renormalize();
        Ok(out)
    }

    /// Validates like `new` but never rescales, preserving the exact bits of
    /// an already-normalized vector (used when reloading saved models).
    pub fn from_normalized(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DimensionMismatch("posterior must not be empty".into()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::DimensionMismatch(format!(
                    "posterior entry {p} is not a probability"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::DimensionMismatch(format!(
                "posterior sums to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// The corner of the simplex that is certain about class `i`.
    pub fn corner(n: usize, i: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// No-op when the sum is already exactly 1, so reconstructing from a
    /// previously normalized vector (e.g. a loaded model) keeps its bits.
    fn renormalize(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        if sum > 0.0 && sum != 1.0 {
            for p in &mut self.probs {
                *p /= sum;
            }
        }
    }
}

/// Per-feature evaluation prices and the misclassification cost matrix.
///
/// `misclass[i][j]` is the cost of declaring class `j` when the truth is `i`.
/// Strictly positive feature costs make every simplex corner a stopping
/// point; a zero cost is accepted for sweep experiments but forfeits that
/// guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    feature_costs: Vec<f64>,
    misclass: Vec<Vec<f64>>,
}

impl CostModel {
    pub fn new(feature_costs: Vec<f64>, misclass: Vec<Vec<f64>>) -> Result<Self> {
        for &c in &feature_costs {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::Config(format!("feature cost {c} must be >= 0")));
            }
        }
        let n = misclass.len();
        if n == 0 {
            return Err(Error::Config("misclassification matrix is empty".into()));
        }
        for row in &misclass {
            if row.len() != n {
                return Err(Error::Config("misclassification matrix must be square".into()));
            }
            for &m in row {
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::Config(format!("misclassification cost {m} must be >= 0")));
                }
            }
        }
        Ok(Self {
            feature_costs,
            misclass,
        })
    }

    /// Uniform feature price with 0-1 misclassification costs.
    pub fn uniform(n_classes: usize, n_features: usize, c: f64) -> Result<Self> {
        let misclass = (0..n_classes)
            .map(|i| {
                (0..n_classes)
                    .map(|j| if i == j { 0.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        Self::new(vec![c; n_features], misclass)
    }

    pub fn n_classes(&self) -> usize {
        self.misclass.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_costs.len()
    }

    pub fn feature_cost(&self, k: usize) -> f64 {
        self.feature_costs[k]
    }

    pub fn feature_costs(&self) -> &[f64] {
        &self.feature_costs
    }

    pub fn misclass(&self) -> &[Vec<f64>] {
        &self.misclass
    }

    /// Expected cost of declaring class `j` right now.
    pub fn decision_risk(&self, pi: &Posterior, j: usize) -> f64 {
        self.decision_risk_raw(pi.probs(), j)
    }

    /// Same, on a raw probability slice (value-iteration inner loop).
    pub fn decision_risk_raw(&self, probs: &[f64], j: usize) -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| self.misclass[i][j] * p)
            .sum()
    }
}

/// One step of the posterior recursion: reweight the belief by the per-class
/// probabilities of the observed bin and renormalize.
pub fn update_posterior(prior: &Posterior, col: &[f64]) -> Result<Posterior> {
    if col.len() != prior.len() {
        return Err(Error::DimensionMismatch(format!(
            "likelihood column has {} entries, posterior has {}",
            col.len(),
            prior.len()
        )));
    }
    let evidence: f64 = prior
        .probs()
        .iter()
        .zip(col)
        .map(|(&p, &l)| p * l)
        .sum();
    if evidence <= EVIDENCE_FLOOR {
        return Err(Error::ZeroEvidence);
    }
    let mut probs: Vec<f64> = prior
        .probs()
        .iter()
        .zip(col)
        .map(|(&p, &l)| p * l / evidence)
        .collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(Posterior { probs })
}

/// Closed-form posterior after a whole batch of observations. Accumulates
/// log-likelihoods and subtracts the maximum before exponentiating, since
/// chains of several thousand factors underflow in linear space. Serves as
/// the oracle for chained `update_posterior` calls.
pub fn batch_posterior<'a, I>(prior: &Posterior, cols: I) -> Result<Posterior>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let n = prior.len();
    let mut log_w: Vec<f64> = prior.probs().iter().map(|&p| p.ln()).collect();
    for col in cols {
        if col.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "likelihood column has {} entries, posterior has {n}",
                col.len()
            )));
        }
        for (lw, &l) in log_w.iter_mut().zip(col) {
            *lw += l.ln();
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroEvidence);
    }
    let mut probs: Vec<f64> = log_w.iter().map(|&lw| (lw - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    if sum <= EVIDENCE_FLOOR {
        return Err(Error::ZeroEvidence);
    }
    for p in &mut probs {
        *p /= sum;
    }
    Ok(Posterior { probs })
}

/// Minimum Bayes risk and the class achieving it; ties go to the lowest
/// class index so repeated calls are deterministic.
pub fn bayes_decide(pi: &Posterior, cm: &CostModel) -> (f64, usize) {
    bayes_decide_raw(pi.probs(), cm)
}

/// Same, on a raw probability slice (value-iteration inner loop).
pub fn bayes_decide_raw(probs: &[f64], cm: &CostModel) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut label = 0;
    for j in 0..cm.n_classes() {
        let risk = cm.decision_risk_raw(probs, j);
        if risk < best {
            best = risk;
            label = j;
        }
    }
    (best, label)
}

/// Probability of observing the bin whose likelihood column is `col`, given
/// the current belief. Over all bins of a feature these values sum to 1.
pub fn predictive_prob(pi: &Posterior, col: &[f64]) -> f64 {
    pi.probs().iter().zip(col).map(|(&p, &l)| p * l).sum()
}
