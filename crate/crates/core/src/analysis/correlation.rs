use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::{IcModel, LiveEdgeGraph, MixtureParams};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::rng;

/// Symmetric edge-pair matrix stored as its upper triangle (diagonal included).
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    m: usize,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    fn slot(&self, j: usize, k: usize) -> usize {
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        a * self.m - a * (a + 1) / 2 + b
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        assert!(j < self.m && k < self.m, "edge index out of range");
        self.values[self.slot(j, k)]
    }

    /// `Σ_i π^i p_j^i p_k^i` for `j ≠ k`, and `Σ_i π^i p_j^i` on the diagonal.
    /// `probs[i]` holds component `i`'s probabilities in edge order.
    pub fn expected(weights: &[f64], probs: &[Vec<f64>]) -> Result<Self> {
        let m = probs.first().map_or(0, Vec::len);
        if weights.len() != probs.len() || probs.iter().any(|p| p.len() != m) {
            return Err(Error::domain(
                "one probability vector of equal length per weight",
            ));
        }
        let mut out = Self {
            m,
            values: vec![0.0; m * (m + 1) / 2],
        };
        for j in 0..m {
            for k in j..m {
                let v = weights
                    .iter()
                    .zip(probs)
                    .map(|(w, p)| if j == k { w * p[j] } else { w * p[j] * p[k] })
                    .sum();
                let slot = out.slot(j, k);
                out.values[slot] = v;
            }
        }
        Ok(out)
    }
}

/// Empirical `E[x_j x_k]` over live-edge observations.
pub fn pairwise_correlation(observations: &[LiveEdgeGraph]) -> Result<CorrelationMatrix> {
    let first = observations
        .first()
        .ok_or_else(|| Error::domain("at least one observation is required"))?;
    let m = first.edge_count();
    if observations.iter().any(|o| o.edge_count() != m) {
        return Err(Error::domain("observations cover different edge sets"));
    }
    let mut out = CorrelationMatrix {
        m,
        values: vec![0.0; m * (m + 1) / 2],
    };
    let mut counts = vec![0u64; out.values.len()];
    let mut live = Vec::new();
    for o in observations {
        live.clear();
        live.extend((0..m).filter(|&e| o.is_live(e)));
        for (i, &j) in live.iter().enumerate() {
            for &k in &live[i..] {
                counts[out.slot(j, k)] += 1;
            }
        }
    }
    let n = observations.len() as f64;
    out.values = counts.into_iter().map(|c| c as f64 / n).collect();
    Ok(out)
}

/// `n` live-edge graphs from the mixture: a component per draw, then independent edges.
/// Draw `i` uses stream `i`.
pub fn sample_mixture_live_edges(
    graph: &DirectedGraph,
    mix: &MixtureParams,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<LiveEdgeGraph>> {
    let models = mix
        .components()
        .iter()
        .map(|c| IcModel::new(graph, c))
        .collect::<Result<Vec<_>>>()?;
    let weights = mix.weights();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(rng_seed, i as u64);
            let x: f64 = r.random();
            let mut acc = 0.0;
            let mut m = weights.len() - 1;
            for (c, w) in weights.iter().enumerate() {
                acc += w;
                if x < acc {
                    m = c;
                    break;
                }
            }
            models[m].sample_live_edges(&mut r)
        })
        .collect())
}
