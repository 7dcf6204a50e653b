use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;

use super::ComponentParams;
use crate::cascade::{Cascade, Event};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::rng;

/// Monte Carlo rounds used when a caller does not choose.
pub const DEFAULT_ROUNDS: usize = 1000;

/// An IC component compiled onto a graph's adjacency for repeated simulation.
///
/// Edge `e` of the compiled model is edge `e` of the source graph.
#[derive(Clone, Debug)]
pub struct IcModel {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl IcModel {
    /// Parameters must only reference graph edges; graph edges without a
    /// parameter never fire.
    pub fn new(graph: &DirectedGraph, params: &ComponentParams) -> Result<Self> {
        if let Some((u, v)) = params.edges().find(|&(u, v)| !graph.contains_edge(u, v)) {
            return Err(Error::domain(format!(
                "parameter for ({}, {}) which is not a graph edge",
                u.0, v.0
            )));
        }
        Ok(Self::with_probs(graph, params.aligned_to(graph)))
    }

    /// Uses `probs[e]` for graph edge `e`.
    pub fn with_probs(graph: &DirectedGraph, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), graph.edge_count());
        let n = graph.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for u in graph.names().ids() {
            offsets.push(graph.out_edge_ids(u).end);
        }
        let targets = graph.edges().iter().map(|&(_, v)| v.0).collect();
        Self {
            offsets,
            targets,
            probs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn prob(&self, edge: usize) -> f64 {
        self.probs[edge]
    }

    fn check_seeds(&self, seeds: &[NodeId]) -> Result<()> {
        if seeds.is_empty() {
            return Err(Error::domain("seed set is empty"));
        }
        if let Some(s) = seeds.iter().find(|s| s.index() >= self.node_count()) {
            return Err(Error::domain(format!("unknown seed node {}", s.0)));
        }
        Ok(())
    }

    /// One discrete-time IC run. Returns `(node, step)` in activation order.
    pub fn run<R: Rng + ?Sized>(&self, seeds: &[NodeId], rng: &mut R) -> Vec<(NodeId, u32)> {
        let mut active = FixedBitSet::with_capacity(self.node_count());
        let mut order = Vec::new();
        for &s in seeds {
            if !active.put(s.index()) {
                order.push((s, 0));
            }
        }
        let mut frontier = 0..order.len();
        let mut step = 0;
        while !frontier.is_empty() {
            step += 1;
            let start = order.len();
            for i in frontier {
                let u = order[i].0.index();
                for e in self.offsets[u]..self.offsets[u + 1] {
                    let v = self.targets[e] as usize;
                    if !active.contains(v) && rng.random::<f64>() < self.probs[e] {
                        active.insert(v);
                        order.push((NodeId(v as u32), step));
                    }
                }
            }
            frontier = start..order.len();
        }
        order
    }

    /// Independently marks each edge live with its probability.
    pub fn sample_live_edges<R: Rng + ?Sized>(&self, rng: &mut R) -> LiveEdgeGraph {
        let mut live = FixedBitSet::with_capacity(self.edge_count());
        for (e, &p) in self.probs.iter().enumerate() {
            if rng.random::<f64>() < p {
                live.insert(e);
            }
        }
        LiveEdgeGraph { live }
    }

    /// Nodes reachable from `seeds` over live, unblocked edges.
    pub fn reach(
        &self,
        live: &LiveEdgeGraph,
        seeds: &[NodeId],
        blocked: Option<&FixedBitSet>,
    ) -> FixedBitSet {
        let mut seen = FixedBitSet::with_capacity(self.node_count());
        let mut stack: Vec<usize> = Vec::new();
        for s in seeds {
            if !seen.put(s.index()) {
                stack.push(s.index());
            }
        }
        while let Some(u) = stack.pop() {
            for e in self.offsets[u]..self.offsets[u + 1] {
                if !live.live.contains(e) || blocked.is_some_and(|b| b.contains(e)) {
                    continue;
                }
                let v = self.targets[e] as usize;
                if !seen.put(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Extends `reached` with everything reachable from `from`; returns how many
    /// nodes were newly added.
    pub(crate) fn extend_reach(
        &self,
        live: &LiveEdgeGraph,
        from: usize,
        reached: &mut FixedBitSet,
    ) -> usize {
        if reached.put(from) {
            return 0;
        }
        let mut added = 1;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for e in self.offsets[u]..self.offsets[u + 1] {
                if live.live.contains(e) {
                    let v = self.targets[e] as usize;
                    if !reached.put(v) {
                        added += 1;
                        stack.push(v);
                    }
                }
            }
        }
        added
    }

    /// Size of the reach of `from` outside `reached`, without modifying it.
    pub(crate) fn marginal_reach(
        &self,
        live: &LiveEdgeGraph,
        from: usize,
        reached: &FixedBitSet,
        scratch: &mut FixedBitSet,
    ) -> usize {
        if reached.contains(from) {
            return 0;
        }
        scratch.clear();
        scratch.insert(from);
        let mut added = 1;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for e in self.offsets[u]..self.offsets[u + 1] {
                if live.live.contains(e) {
                    let v = self.targets[e] as usize;
                    if !reached.contains(v) && !scratch.put(v) {
                        added += 1;
                        stack.push(v);
                    }
                }
            }
        }
        added
    }
}

/// Live/blocked status of every edge of one IC realization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveEdgeGraph {
    live: FixedBitSet,
}

impl LiveEdgeGraph {
    pub fn from_indicators(indicators: &[bool]) -> Self {
        let mut live = FixedBitSet::with_capacity(indicators.len());
        for (e, &x) in indicators.iter().enumerate() {
            live.set(e, x);
        }
        Self { live }
    }

    pub fn edge_count(&self) -> usize {
        self.live.len()
    }

    pub fn is_live(&self, edge: usize) -> bool {
        self.live.contains(edge)
    }

    pub fn live_count(&self) -> usize {
        self.live.count_ones(..)
    }

    pub fn indicators(&self) -> Vec<bool> {
        (0..self.live.len())
            .map(|e| self.live.contains(e))
            .collect()
    }
}

/// Mean activated-set size over independent rounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub rounds: usize,
}

impl InfluenceEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            rounds: samples.len(),
        }
    }
}

/// One IC cascade with integer step timestamps, deterministic in `rng_seed`.
pub fn simulate_ic(
    graph: &DirectedGraph,
    params: &ComponentParams,
    seeds: &[NodeId],
    rng_seed: u64,
) -> Result<Cascade> {
    let model = IcModel::new(graph, params)?;
    model.check_seeds(seeds)?;
    let run = model.run(seeds, &mut rng::stream(rng_seed, 0));
    Cascade::new(
        "sim",
        None,
        run.into_iter()
            .map(|(user, step)| Event {
                user,
                time: step as f64,
            })
            .collect(),
    )
}

pub fn sample_live_edge_graph(
    graph: &DirectedGraph,
    params: &ComponentParams,
    rng_seed: u64,
) -> Result<LiveEdgeGraph> {
    let model = IcModel::new(graph, params)?;
    Ok(model.sample_live_edges(&mut rng::stream(rng_seed, 0)))
}

/// Monte Carlo estimate of the expected spread of `seeds` by forward simulation.
/// Round `r` uses stream `r` of `rng_seed`.
pub fn estimate_influence(
    graph: &DirectedGraph,
    params: &ComponentParams,
    seeds: &[NodeId],
    rounds: usize,
    rng_seed: u64,
) -> Result<InfluenceEstimate> {
    let model = IcModel::new(graph, params)?;
    model.check_seeds(seeds)?;
    if rounds == 0 {
        return Err(Error::domain("at least one round is required"));
    }
    let sizes: Vec<f64> = (0..rounds as u64)
        .into_par_iter()
        .map(|r| model.run(seeds, &mut rng::stream(rng_seed, r)).len() as f64)
        .collect();
    Ok(InfluenceEstimate::from_samples(&sizes))
}

/// Same quantity as [`estimate_influence`], computed as reachability over sampled
/// live-edge graphs.
pub fn estimate_influence_live_edge(
    graph: &DirectedGraph,
    params: &ComponentParams,
    seeds: &[NodeId],
    rounds: usize,
    rng_seed: u64,
) -> Result<InfluenceEstimate> {
    let model = IcModel::new(graph, params)?;
    model.check_seeds(seeds)?;
    if rounds == 0 {
        return Err(Error::domain("at least one round is required"));
    }
    let sizes: Vec<f64> = (0..rounds as u64)
        .into_par_iter()
        .map(|r| {
            let live = model.sample_live_edges(&mut rng::stream(rng_seed, r));
            model.reach(&live, seeds, None).count_ones(..) as f64
        })
        .collect();
    Ok(InfluenceEstimate::from_samples(&sizes))
}
