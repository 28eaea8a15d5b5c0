//! Discretization of the probability simplex: every point with coordinates
//! that are multiples of 1/G, enumerated in ascending lexicographic order of
//! their integer compositions. Value iteration tabulates costs on this grid
//! and arbitrary posteriors are mapped to their nearest grid point.

use crate::error::{Error, Result};
use crate::probability::Posterior;

/// Ceiling on the number of grid points before a run is refused.
pub const DEFAULT_GRID_BOUND: u64 = 2_000_000;

/// Overflow-saturating binomial coefficient.
fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of grid points: compositions of `resolution` into one part per
/// class, i.e. C(resolution + classes - 1, classes - 1).
pub fn size_for(n_classes: usize, resolution: u32) -> u128 {
    binomial(
        resolution as u64 + n_classes as u64 - 1,
        n_classes as u64 - 1,
    )
}

/// The finest default resolution whose grid fits under `bound`: starts from
/// 100 for binary problems and 30 otherwise, then coarsens as needed.
pub fn default_resolution(n_classes: usize, bound: u64) -> u32 {
    let mut g = if n_classes == 2 { 100 } else { 30 };
    while g > 1 && size_for(n_classes, g) > bound as u128 {
        g -= 1;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    counts: Vec<u32>,
    n_classes: usize,
    resolution: u32,
}

impl SimplexGrid {
    pub fn build(n_classes: usize, resolution: u32, bound: u64) -> Result<SimplexGrid> {
        if n_classes == 0 {
            return Err(Error::Config("grid needs at least one class".into()));
        }
        if resolution == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        let points = size_for(n_classes, resolution);
        if points > bound as u128 {
            return Err(Error::GridTooLarge { points, bound });
        }
        let mut counts = Vec::with_capacity(points as usize * n_classes);
        let mut prefix = Vec::with_capacity(n_classes);
        emit_compositions(&mut prefix, resolution, n_classes, &mut counts);
        Ok(SimplexGrid {
            counts,
            n_classes,
            resolution,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len() / self.n_classes
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    /// Integer composition of the idx-th point.
    pub fn point(&self, idx: usize) -> &[u32] {
        &self.counts[idx * self.n_classes..(idx + 1) * self.n_classes]
    }

    /// The idx-th point as probabilities.
    pub fn fractions(&self, idx: usize) -> Vec<f64> {
        let g = f64::from(self.resolution);
        self.point(idx).iter().map(|&c| f64::from(c) / g).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks_exact(self.n_classes)
    }

    /// Index of a composition in the enumeration order, computed by counting
    /// how many compositions precede it lexicographically.
    pub fn rank(&self, point: &[u32]) -> usize {
        debug_assert_eq!(point.len(), self.n_classes);
        debug_assert_eq!(point.iter().sum::<u32>(), self.resolution);
        let n = self.n_classes;
        let mut rank: u128 = 0;
        let mut remaining = self.resolution;
        for pos in 0..n.saturating_sub(1) {
            let parts_left = (n - pos - 1) as u64;
            for m in 0..point[pos] {
                rank += binomial((remaining - m) as u64 + parts_left - 1, parts_left - 1);
            }
            remaining -= point[pos];
        }
        rank as usize
    }

    /// Nearest grid point in L1 distance, breaking ties toward the
    /// lexicographically smallest composition. Floors every coordinate and
    /// hands the leftover mass to the largest fractional remainders,
    /// preferring higher indices on equal remainders.
    pub fn project(&self, pi: &Posterior) -> usize {
        self.project_raw(pi.probs())
    }

    /// Same, on a raw probability slice.
    pub fn project_raw(&self, probs: &[f64]) -> usize {
        let g = self.resolution;
        let scaled: Vec<f64> = probs.iter().map(|&p| p * f64::from(g)).collect();
        let mut base: Vec<u32> = scaled.iter().map(|&s| (s.floor() as u32).min(g)).collect();
        let assigned: u32 = base.iter().sum();
        let leftover = g.saturating_sub(assigned) as usize;
        let mut order: Vec<usize> = (0..base.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - f64::from(base[a]);
            let fb = scaled[b] - f64::from(base[b]);
            fb.total_cmp(&fa).then(b.cmp(&a))
        });
        for &i in order.iter().take(leftover) {
            base[i] += 1;
        }
        self.rank(&base)
    }
}

fn emit_compositions(prefix: &mut Vec<u32>, remaining: u32, slots: usize, out: &mut Vec<u32>) {
    if slots == 1 {
        out.extend_from_slice(prefix);
        out.push(remaining);
        return;
    }
    for m in 0..=remaining {
        prefix.push(m);
        emit_compositions(prefix, remaining - m, slots - 1, out);
        prefix.pop();
    }
}
