//! Turns raw training data into the probabilistic model: per-feature
//! quantile binning, Laplace-smoothed class-conditional likelihood tables,
//! empirical priors, and the cheapest-first feature ordering.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::probability::Posterior;

/// Per-feature bin edges from equal-frequency (quantile) splits.
///
/// Edges are strictly ascending; duplicate quantiles are collapsed and edges
/// at or above the feature's maximum are dropped (they could never separate
/// anything under the "strictly below the edge" assignment rule), so a
/// constant feature ends up with no edges at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    edges: Vec<Vec<f64>>,
    n_bins: usize,
}

/// Linear-interpolation quantile of pre-sorted values (the same convention
/// as numpy's default): position h = (n-1)q between order statistics.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        sorted[lo.min(n - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

impl Quantizer {
    /// Fits `n_bins` equal-frequency bins per feature from the finite
    /// training values only.
    pub fn fit(data: &Dataset, n_bins: usize) -> Quantizer {
        assert!(n_bins >= 2, "need at least two bins");
        let edges = (0..data.n_features())
            .map(|k| {
                let mut vals: Vec<f64> = (0..data.n_instances())
                    .map(|i| data.value(i, k))
                    .filter(|v| v.is_finite())
                    .collect();
                if vals.is_empty() {
                    return Vec::new();
                }
                vals.sort_by(|a, b| a.partial_cmp(b).expect("finite values are ordered"));
                let max = *vals.last().expect("non-empty");
                let mut edges = Vec::with_capacity(n_bins - 1);
                for j in 1..n_bins {
                    let e = sorted_quantile(&vals, j as f64 / n_bins as f64);
                    if e < max && edges.last().is_none_or(|&last| e > last) {
                        edges.push(e);
                    }
                }
                edges
            })
            .collect();
        Quantizer { edges, n_bins }
    }

    /// Builds a quantizer from explicit edges (ascending per feature).
    pub fn from_edges(edges: Vec<Vec<f64>>, n_bins: usize) -> Result<Quantizer> {
        if n_bins < 2 {
            return Err(Error::Config("need at least two bins".into()));
        }
        for per_feature in &edges {
            if per_feature.len() + 1 > n_bins {
                return Err(Error::Config(format!(
                    "{} edges exceed {} bins",
                    per_feature.len(),
                    n_bins
                )));
            }
            if !per_feature.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config("bin edges must be strictly ascending".into()));
            }
        }
        Ok(Quantizer { edges, n_bins })
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    /// 0-based bin of a raw value: the number of edges strictly below it, so
    /// boundary values land in the lower bin and out-of-range values clamp
    /// to the outermost bins. NaN means a missing value.
    pub fn quantize(&self, feature: usize, x: f64) -> Option<usize> {
        if x.is_nan() {
            return None;
        }
        Some(self.edges[feature].iter().take_while(|&&e| e < x).count())
    }

    /// Quantizes a whole dataset.
    pub fn apply(&self, data: &Dataset) -> BinnedData {
        assert_eq!(data.n_features(), self.n_features(), "feature count changed");
        let bins = (0..data.n_instances())
            .flat_map(|i| {
                (0..data.n_features()).map(move |k| {
                    self.quantize(k, data.value(i, k)).map(|b| b as u16)
                })
            })
            .collect();
        BinnedData {
            bins,
            n_instances: data.n_instances(),
            n_features: data.n_features(),
        }
    }
}

/// Quantized instance matrix; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedData {
    bins: Vec<Option<u16>>,
    n_instances: usize,
    n_features: usize,
}

impl BinnedData {
    pub fn from_rows(rows: &[Vec<Option<u16>>]) -> BinnedData {
        let n_features = rows.first().map_or(0, |r| r.len());
        BinnedData {
            bins: rows.iter().flatten().copied().collect(),
            n_instances: rows.len(),
            n_features,
        }
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn bin(&self, instance: usize, feature: usize) -> Option<u16> {
        self.bins[instance * self.n_features + feature]
    }

    pub fn row(&self, instance: usize) -> &[Option<u16>] {
        &self.bins[instance * self.n_features..(instance + 1) * self.n_features]
    }
}

/// Class-conditional bin probabilities for every feature, stored flat as
/// (feature, bin, class) with the class axis contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTable {
    table: Vec<f64>,
    n_features: usize,
    n_bins: usize,
    n_classes: usize,
}

impl LikelihoodTable {
    /// Add-one smoothed estimates: (count of class-i training values in bin
    /// v of feature k + 1) / (class-i values present for feature k + bins).
    /// Every entry is strictly positive and each (feature, class) row sums
    /// to 1; a class with no samples gets the uniform row.
    pub fn estimate(
        binned: &BinnedData,
        labels: &[usize],
        n_classes: usize,
        n_bins: usize,
    ) -> LikelihoodTable {
        assert_eq!(binned.n_instances(), labels.len(), "one label per instance");
        let k = binned.n_features();
        let mut counts = vec![0u32; k * n_bins * n_classes];
        let mut present = vec![0u32; k * n_classes];
        for (r, &label) in labels.iter().enumerate() {
            for f in 0..k {
                if let Some(bin) = binned.bin(r, f) {
                    counts[(f * n_bins + bin as usize) * n_classes + label] += 1;
                    present[f * n_classes + label] += 1;
                }
            }
        }
        let table = (0..k * n_bins * n_classes)
            .map(|idx| {
                let i = idx % n_classes;
                let f = idx / (n_bins * n_classes);
                let denom = present[f * n_classes + i] as f64 + n_bins as f64;
                (counts[idx] as f64 + 1.0) / denom
            })
            .collect();
        LikelihoodTable {
            table,
            n_features: k,
            n_bins,
            n_classes,
        }
    }

    /// Builds a table from explicit probabilities (feature-major, then bin,
    /// then class). Rows must be distributions; a bin may have probability 0
    /// under some classes but not all of them.
    pub fn from_parts(
        n_features: usize,
        n_bins: usize,
        n_classes: usize,
        table: Vec<f64>,
    ) -> Result<LikelihoodTable> {
        if table.len() != n_features * n_bins * n_classes {
            return Err(Error::DimensionMismatch(format!(
                "table has {} entries, expected {}",
                table.len(),
                n_features * n_bins * n_classes
            )));
        }
        for &p in &table {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::DimensionMismatch(format!(
                    "likelihood {p} outside [0,1]"
                )));
            }
        }
        let lt = LikelihoodTable {
            table,
            n_features,
            n_bins,
            n_classes,
        };
        for f in 0..n_features {
            for i in 0..n_classes {
                let sum: f64 = (0..n_bins).map(|v| lt.prob(f, v, i)).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::DimensionMismatch(format!(
                        "bin probabilities for feature {f}, class {i} sum to {sum}"
                    )));
                }
            }
            for v in 0..n_bins {
                if lt.column(f, v).iter().all(|&p| p == 0.0) {
                    return Err(Error::DimensionMismatch(format!(
                        "bin {v} of feature {f} is impossible under every class"
                    )));
                }
            }
        }
        Ok(lt)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// The per-class probabilities of seeing bin `v` at feature `k`.
    pub fn column(&self, feature: usize, bin: usize) -> &[f64] {
        let start = (feature * self.n_bins + bin) * self.n_classes;
        &self.table[start..start + self.n_classes]
    }

    pub fn prob(&self, feature: usize, bin: usize, class: usize) -> f64 {
        self.table[(feature * self.n_bins + bin) * self.n_classes + class]
    }

    pub fn raw(&self) -> &[f64] {
        &self.table
    }
}

/// Empirical class frequencies.
pub fn estimate_priors(labels: &[usize], n_classes: usize) -> Result<Posterior> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    Posterior::new(
        counts
            .iter()
            .map(|&c| c as f64 / labels.len() as f64)
            .collect(),
    )
}

/// Evaluation order of the features: cheap, low-error features first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureOrder {
    permutation: Vec<usize>,
    scores: Vec<f64>,
}

impl FeatureOrder {
    pub fn from_parts(permutation: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if permutation.len() != scores.len() {
            return Err(Error::DimensionMismatch(
                "permutation and scores differ in length".into(),
            ));
        }
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= permutation.len() || seen[p] {
                return Err(Error::DimensionMismatch("not a permutation".into()));
            }
            seen[p] = true;
        }
        Ok(Self {
            permutation,
            scores,
        })
    }

    pub fn identity(n_features: usize) -> Self {
        Self {
            permutation: (0..n_features).collect(),
            scores: vec![0.0; n_features],
        }
    }

    pub fn n_features(&self) -> usize {
        self.permutation.len()
    }

    /// The feature evaluated at a given stage (0-based).
    pub fn feature_at(&self, stage: usize) -> usize {
        self.permutation[stage]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Scores aligned with the permutation, non-decreasing by construction.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Scores each feature by its evaluation cost times the summed one-vs-rest
/// error rates of the single-feature Bayes classifier, then sorts ascending
/// (stable, ties by original feature index).
///
/// For each class i the classifier predicts "i" on bin v exactly when
/// P(v|i)p_i >= sum over other classes j of P(v|j)p_j; its false-positive
/// and false-negative rates on the training rows are the type I and type II
/// errors for that formulation.
pub fn order_features(
    lik: &LikelihoodTable,
    priors: &Posterior,
    binned: &BinnedData,
    labels: &[usize],
    feature_costs: &[f64],
) -> FeatureOrder {
    let k = lik.n_features();
    let n = lik.n_classes();
    let v = lik.n_bins();
    assert_eq!(feature_costs.len(), k, "one cost per feature");
    assert_eq!(binned.n_instances(), labels.len(), "one label per instance");

    let mut scored: Vec<(f64, usize)> = (0..k)
        .map(|f| {
            let mut err_sum = 0.0;
            for i in 0..n {
                let predict_i: Vec<bool> = (0..v)
                    .map(|bin| {
                        let col = lik.column(f, bin);
                        let own = col[i] * priors.probs()[i];
                        let rest: f64 = (0..n)
                            .filter(|&j| j != i)
                            .map(|j| col[j] * priors.probs()[j])
                            .sum();
                        own >= rest
                    })
                    .collect();
                let (mut fp, mut fn_, mut pos, mut neg) = (0u32, 0u32, 0u32, 0u32);
                for (r, &label) in labels.iter().enumerate() {
                    let Some(bin) = binned.bin(r, f) else { continue };
                    let predicted = predict_i[bin as usize];
                    if label == i {
                        pos += 1;
                        if !predicted {
                            fn_ += 1;
                        }
                    } else {
                        neg += 1;
                        if predicted {
                            fp += 1;
                        }
                    }
                }
                if neg > 0 {
                    err_sum += fp as f64 / neg as f64;
                }
                if pos > 0 {
                    err_sum += fn_ as f64 / pos as f64;
                }
            }
            (feature_costs[f] * err_sum, f)
        })
        .collect();

    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    FeatureOrder {
        permutation: scored.iter().map(|&(_, f)| f).collect(),
        scores: scored.iter().map(|&(s, _)| s).collect(),
    }
}
