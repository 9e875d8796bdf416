use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Graph, Real, Var};

/// Sinusoidal encoding of 3-vectors:
/// `[v?, sin(2⁰πv), cos(2⁰πv), …, sin(2^{L−1}πv), cos(2^{L−1}πv)]`,
/// each term covering all three components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub frequencies: usize,
    pub include_identity: bool,
}

impl EncodingConfig {
    pub fn new(frequencies: usize, include_identity: bool) -> Self {
        Self {
            frequencies,
            include_identity,
        }
    }

    /// Encoded width for one 3-vector.
    pub fn width(&self) -> usize {
        3 * (usize::from(self.include_identity) + 2 * self.frequencies)
    }

    /// On-tape encoding of a `[n, 3]` batch.
    pub fn encode<T: Real>(&self, g: &Graph<T>, v: Var) -> Result<Var, AutodiffError> {
        let mut parts = Vec::with_capacity(1 + 2 * self.frequencies);
        if self.include_identity {
            parts.push(v);
        }
        for k in 0..self.frequencies {
            let s = g.scale(v, T::of(2f64.powi(k as i32) * PI));
            parts.push(g.sin(s));
            parts.push(g.cos(s));
        }
        if parts.is_empty() {
            return Err(AutodiffError::InvalidArgument {
                op: "encode",
                reason: "encoding with no identity and no frequencies is empty".into(),
            });
        }
        g.concat(&parts, 1)
    }
}

/// Encodes a single vector in `f64`.
pub fn positional_encode(v: [f64; 3], config: &EncodingConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(config.width());
    if config.include_identity {
        out.extend_from_slice(&v);
    }
    for k in 0..config.frequencies {
        let f = 2f64.powi(k as i32) * PI;
        out.extend(v.iter().map(|x| (f * x).sin()));
        out.extend(v.iter().map(|x| (f * x).cos()));
    }
    out
}
