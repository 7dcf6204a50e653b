//! Independent Cascade models and their two-component (generally k-component)
//! mixture: parameter containers, simulation, influence estimation, and the
//! synthetic benchmark generator.

mod benchmark;
mod mixture;
mod simulate;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, GraphBuilder, Interner, NodeId};

pub use benchmark::{
    generate_synthetic_benchmark, random_graph, BenchmarkBundle, BenchmarkConfig, BenchmarkSet,
};
pub use mixture::{sample_mixture_cascades, SeedDistribution};
pub use simulate::{
    estimate_influence, estimate_influence_live_edge, sample_live_edge_graph, simulate_ic, IcModel,
    InfluenceEstimate, LiveEdgeGraph, DEFAULT_ROUNDS,
};

/// Tolerance on the mixing weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Per-edge activation probabilities of one IC component.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComponentParams {
    probs: BTreeMap<(NodeId, NodeId), f64>,
}

impl ComponentParams {
    pub fn new(probs: BTreeMap<(NodeId, NodeId), f64>) -> Result<Self> {
        if let Some((&(u, v), p)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!(
                "edge ({}, {}) probability {p} outside [0, 1]",
                u.0, v.0
            )));
        }
        Ok(Self { probs })
    }

    pub fn from_edges<I: IntoIterator<Item = ((NodeId, NodeId), f64)>>(edges: I) -> Result<Self> {
        Self::new(edges.into_iter().collect())
    }

    /// The same probability on every edge of `graph`.
    pub fn uniform(graph: &DirectedGraph, p: f64) -> Result<Self> {
        Self::from_edges(graph.edges().iter().map(|&e| (e, p)))
    }

    /// Reads the graph's edge weights; unweighted edges get probability 0.
    pub fn from_graph_weights(graph: &DirectedGraph) -> Self {
        Self {
            probs: graph
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &uv)| (uv, graph.weight(e).unwrap_or(0.0)))
                .collect(),
        }
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.probs.get(&(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Edges in `(source, target)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.probs.iter().map(|(&e, &p)| (e, p))
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.probs.keys().copied()
    }

    /// Probabilities aligned with `graph.edges()`; edges without a parameter get 0.
    pub fn aligned_to(&self, graph: &DirectedGraph) -> Vec<f64> {
        graph
            .edges()
            .iter()
            .map(|e| self.probs.get(e).copied().unwrap_or(0.0))
            .collect()
    }

    /// Graph over the parameter keys, probabilities stored as edge weights.
    pub fn to_graph(&self, names: Interner) -> Result<DirectedGraph> {
        let mut b = GraphBuilder::with_interner(names);
        for (&(u, v), &p) in &self.probs {
            b.add_edge(u, v, Some(p))?;
        }
        Ok(b.build())
    }
}

/// Mixing weights and one [`ComponentParams`] per component over a shared edge set.
///
/// Component 0 is the "true" component and component 1 the "fake" one.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    weights: Vec<f64>,
    components: Vec<ComponentParams>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<ComponentParams>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::domain(format!(
                "{} mixing weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::domain(format!("mixing weight {w} outside [0, 1]")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!(
                "mixing weights sum to {total}, not 1"
            )));
        }
        let keys = |c: &ComponentParams| c.probs.keys().copied().collect::<Vec<_>>();
        let first = keys(&components[0]);
        if components.iter().skip(1).any(|c| keys(c) != first) {
            return Err(Error::domain("mixture components must share one edge set"));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    /// Two components, weights `(π_true, 1 − π_true)`.
    pub fn two(
        pi_true: f64,
        true_params: ComponentParams,
        fake_params: ComponentParams,
    ) -> Result<Self> {
        Self::new(vec![pi_true, 1.0 - pi_true], vec![true_params, fake_params])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[ComponentParams] {
        &self.components
    }

    pub fn component(&self, m: usize) -> &ComponentParams {
        &self.components[m]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.components[0].edges()
    }

    /// Relabels components: result component `i` is input component `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        if order.len() != self.k()
            || order
                .iter()
                .any(|&i| i >= self.k() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::domain("component order must be a permutation"));
        }
        Ok(Self {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: &[((u32, u32), f64)]) -> ComponentParams {
        ComponentParams::from_edges(p.iter().map(|&((u, v), p)| ((NodeId(u), NodeId(v)), p)))
            .unwrap()
    }

    #[test]
    fn component_params_validate_range() {
        assert!(ComponentParams::from_edges([((NodeId(0), NodeId(1)), 1.2)]).is_err());
        assert!(ComponentParams::from_edges([((NodeId(0), NodeId(1)), -0.1)]).is_err());
    }

    #[test]
    fn mixture_invariants() {
        let a = params(&[((0, 1), 0.3)]);
        let b = params(&[((0, 1), 0.7)]);
        let c = params(&[((1, 0), 0.7)]);
        assert!(MixtureParams::two(0.4, a.clone(), b.clone()).is_ok());
        assert!(MixtureParams::new(vec![0.5, 0.6], vec![a.clone(), b.clone()]).is_err());
        assert!(MixtureParams::two(0.4, a.clone(), c).is_err());
        assert!(MixtureParams::new(vec![1.0], vec![a.clone(), b.clone()]).is_err());

        let m = MixtureParams::two(0.25, a.clone(), b.clone()).unwrap();
        let swapped = m.permuted(&[1, 0]).unwrap();
        assert_eq!(swapped.weights(), &[0.75, 0.25]);
        assert_eq!(swapped.component(0), &b);
        assert!(m.permuted(&[0, 0]).is_err());
    }
}
