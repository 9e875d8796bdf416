use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Ray;

/// Distance used for the last sample's interval.
pub const FAR_SENTINEL: f64 = 1e10;

/// Ordered sample distances along one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub t: Vec<f64>,
    /// `t[i+1] − t[i]`, with [`FAR_SENTINEL`] for the last sample.
    pub deltas: Vec<f64>,
}

impl SampleBatch {
    pub fn from_t(t: Vec<f64>) -> Self {
        let deltas = interval_lengths(&t);
        Self { t, deltas }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

pub fn interval_lengths(t: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if !t.is_empty() {
        d.push(FAR_SENTINEL);
    }
    d
}

/// One sample per equal-width bin of `[near, far]`, jittered uniformly
/// inside the bin when `rng` is given and at the bin midpoint otherwise.
pub fn stratified_sample<R: Rng>(ray: &Ray, count: usize, rng: Option<&mut R>) -> SampleBatch {
    let count = count.max(2);
    let width = (ray.far - ray.near) / count as f64;
    let t = match rng {
        Some(rng) => (0..count)
            .map(|i| ray.near + (i as f64 + rng.gen::<f64>()) * width)
            .collect(),
        None => (0..count).map(|i| ray.near + (i as f64 + 0.5) * width).collect(),
    };
    SampleBatch::from_t(t)
}

/// Which coarse weights drive a resampling pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSource {
    Glass,
    ViewIndependent,
}

/// New sample distances plus whether the weights were all zero and the
/// sampler fell back to a uniform distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Resampled {
    pub source: SampleSource,
    pub t: Vec<f64>,
    pub uniform_fallback: bool,
}

/// Inverse-CDF sampling from the piecewise-constant density whose bins are
/// centred on the coarse samples (edges at midpoints, clamped to
/// `[near, far]`) and whose masses are `weights`.
///
/// Draws are stratified over `[0, 1)`: one per equal slice, jittered when
/// `rng` is given.
pub fn hierarchical_resample<R: Rng>(
    coarse_t: &[f64],
    weights: &[f64],
    near: f64,
    far: f64,
    count: usize,
    source: SampleSource,
    rng: Option<&mut R>,
) -> Resampled {
    assert_eq!(coarse_t.len(), weights.len());
    let n = coarse_t.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(near);
    edges.extend(coarse_t.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(far);

    let clean: Vec<f64> = weights
        .iter()
        .map(|&w| if w.is_finite() && w > 0.0 { w } else { 0.0 })
        .collect();
    let total: f64 = clean.iter().sum();
    let uniform_fallback = total <= 0.0;
    let mass: Vec<f64> = if uniform_fallback {
        // uniform density over [near, far]
        edges.windows(2).map(|e| e[1] - e[0]).collect()
    } else {
        clean
    };
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for m in &mass {
        acc += m / total;
        cdf.push(acc);
    }

    let mut us: Vec<f64> = match rng {
        Some(rng) => (0..count)
            .map(|k| (k as f64 + rng.gen::<f64>()) / count as f64)
            .collect(),
        None => (0..count).map(|k| (k as f64 + 0.5) / count as f64).collect(),
    };
    us.iter_mut().for_each(|u| *u = u.min(acc * (1.0 - 1e-12)));

    let t = us
        .iter()
        .map(|&u| {
            // first bin whose upper cdf exceeds u; empty bins are skipped
            let mut bin = cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
            while mass[bin] <= 0.0 && bin + 1 < n {
                bin += 1;
            }
            let frac = ((u - cdf[bin]) / (cdf[bin + 1] - cdf[bin])).clamp(0.0, 1.0);
            edges[bin] + frac * (edges[bin + 1] - edges[bin])
        })
        .collect();
    Resampled {
        source,
        t,
        uniform_fallback,
    }
}

/// Sorted union of sample sets.
pub fn merge_sorted(sets: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all
}
