//! Node-monitoring and edge-removal interventions against fake cascades.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::Cascade;
use crate::diffusion::{ComponentParams, IcModel};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::influence::InfluencerRanking;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterventionRow {
    pub k: usize,
    pub mean_reduction_pct: f64,
    pub std_error: f64,
    /// Cascades (node interventions) or simulation rounds (edge interventions).
    pub n_eval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterventionReport {
    pub strategy: String,
    pub rows: Vec<InterventionRow>,
}

fn check_k_values(k_values: &[usize], available: usize) -> Result<()> {
    if k_values.is_empty() || k_values[0] == 0 || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "K values must be positive and strictly increasing",
        ));
    }
    let max = *k_values.last().unwrap();
    if max > available {
        return Err(Error::domain(format!(
            "K = {max} exceeds the {available} candidates supplied"
        )));
    }
    Ok(())
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fraction of engagements strictly after the first monitored engagement.
fn prevented_fraction(c: &Cascade, monitored: &HashSet<NodeId>) -> f64 {
    let events = c.events();
    match events.iter().find(|e| monitored.contains(&e.user)) {
        None => 0.0,
        Some(hit) => {
            let later = events.iter().filter(|e| e.time > hit.time).count();
            later as f64 / events.len() as f64
        }
    }
}

/// Mean % of each observed fake cascade cut off by monitoring the first `K`
/// nodes of `monitored`. The intercepting engagement itself is not prevented.
pub fn node_intervention_eval(
    fake_cascades: &[Cascade],
    monitored: &[NodeId],
    k_values: &[usize],
    strategy: &str,
) -> Result<InterventionReport> {
    if fake_cascades.is_empty() {
        return Err(Error::domain("no fake cascades to evaluate"));
    }
    check_k_values(k_values, monitored.len())?;
    let rows = k_values
        .iter()
        .map(|&k| {
            let set: HashSet<NodeId> = monitored[..k].iter().copied().collect();
            let pct: Vec<f64> = fake_cascades
                .par_iter()
                .map(|c| 100.0 * prevented_fraction(c, &set))
                .collect();
            let (mean, se) = mean_se(&pct);
            InterventionRow {
                k,
                mean_reduction_pct: mean,
                std_error: se,
                n_eval: pct.len(),
            }
        })
        .collect();
    Ok(InterventionReport {
        strategy: strategy.to_string(),
        rows,
    })
}

/// Monitors users in the fake component's influence order.
pub fn node_strategy_mic(ranking: &InfluencerRanking) -> Result<Vec<NodeId>> {
    if ranking.entries.is_empty() {
        return Err(Error::domain("influencer ranking is empty"));
    }
    Ok(ranking.nodes())
}

/// Users by descending engagement count over `cascades`, ties by node index.
pub fn node_strategy_topu(cascades: &[Cascade]) -> Vec<NodeId> {
    if cascades.is_empty() {
        log::warn!("no cascades to rank users from");
        return Vec::new();
    }
    let mut counts: std::collections::HashMap<NodeId, usize> = std::collections::HashMap::new();
    for c in cascades {
        for u in c.users() {
            *counts.entry(u).or_default() += 1;
        }
    }
    let mut users: Vec<(NodeId, usize)> = counts.into_iter().collect();
    users.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    users.into_iter().map(|(u, _)| u).collect()
}

/// Edges by descending fake-component probability, ties by `(u, v)`.
pub fn edge_strategy_mic(fake_params: &ComponentParams) -> Vec<(NodeId, NodeId)> {
    let mut edges: Vec<((NodeId, NodeId), f64)> = fake_params.iter().collect();
    edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    edges.into_iter().map(|(e, _)| e).collect()
}

/// Uniform random permutation of the graph's edges.
pub fn edge_strategy_random(graph: &DirectedGraph, rng_seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut edges = graph.edges().to_vec();
    edges.shuffle(&mut rng::stream(rng_seed, 0));
    edges
}

/// First-engagement user of every cascade (a multiset).
pub fn head_users(cascades: &[Cascade]) -> Vec<NodeId> {
    cascades.iter().map(|c| c.events()[0].user).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeEvalConfig {
    pub rounds: usize,
    /// Seeds drawn per round from the seed pool.
    pub seed_set_size: usize,
    pub rng_seed: u64,
}

impl Default for EdgeEvalConfig {
    fn default() -> Self {
        Self {
            rounds: crate::diffusion::DEFAULT_ROUNDS,
            seed_set_size: 1,
            rng_seed: 0,
        }
    }
}

/// `(μ_before − μ_after) / μ_before · 100` for removing the first `K` edges of
/// `removed`, simulated under `fake_params`.
///
/// Round `r` draws one live-edge sample and one seed set from stream `r` and
/// evaluates every `K` on that same sample, so the curve is monotone in `K` for
/// nested removal sets. The standard error is the delta-method error of the
/// ratio of paired means.
pub fn edge_intervention_eval(
    graph: &DirectedGraph,
    fake_params: &ComponentParams,
    removed: &[(NodeId, NodeId)],
    k_values: &[usize],
    seed_pool: &[NodeId],
    cfg: &EdgeEvalConfig,
    strategy: &str,
) -> Result<InterventionReport> {
    check_k_values(k_values, removed.len())?;
    if cfg.rounds == 0 {
        return Err(Error::domain("at least one round is required"));
    }
    if seed_pool.is_empty() || cfg.seed_set_size == 0 {
        return Err(Error::domain(
            "seed pool and seed-set size must be non-empty",
        ));
    }
    if let Some(s) = seed_pool.iter().find(|s| s.index() >= graph.node_count()) {
        return Err(Error::domain(format!(
            "seed node {} is not in the graph",
            s.0
        )));
    }
    let model = IcModel::new(graph, fake_params)?;
    let edge_ids = removed
        .iter()
        .map(|&(u, v)| {
            graph.edge_id(u, v).ok_or_else(|| {
                Error::domain(format!("edge ({}, {}) is not in the graph", u.0, v.0))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let blocked: Vec<FixedBitSet> = k_values
        .iter()
        .map(|&k| {
            let mut b = FixedBitSet::with_capacity(graph.edge_count());
            edge_ids[..k].iter().for_each(|&e| b.insert(e));
            b
        })
        .collect();

    // per round: size without removal, then per-K sizes
    let per_round: Vec<(f64, Vec<f64>)> = (0..cfg.rounds)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.rng_seed, r as u64);
            let seeds: Vec<NodeId> = (0..cfg.seed_set_size)
                .map(|_| seed_pool[rng.random_range(0..seed_pool.len())])
                .collect();
            let live = model.sample_live_edges(&mut rng);
            let before = model.reach(&live, &seeds, None).count_ones(..) as f64;
            let after = blocked
                .iter()
                .map(|b| model.reach(&live, &seeds, Some(b)).count_ones(..) as f64)
                .collect();
            (before, after)
        })
        .collect();

    let n = cfg.rounds as f64;
    let mean_before = per_round.iter().map(|r| r.0).sum::<f64>() / n;
    let rows = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let diffs: Vec<f64> = per_round.iter().map(|(b, a)| b - a[i]).collect();
            let mean_diff = diffs.iter().sum::<f64>() / n;
            let ratio = mean_diff / mean_before;
            let se = if cfg.rounds < 2 {
                0.0
            } else {
                let resid: f64 = per_round
                    .iter()
                    .zip(&diffs)
                    .map(|((b, _), d)| (d - ratio * b).powi(2))
                    .sum::<f64>()
                    / (n - 1.0);
                (resid / n).sqrt() / mean_before
            };
            InterventionRow {
                k,
                mean_reduction_pct: 100.0 * ratio,
                std_error: 100.0 * se,
                n_eval: cfg.rounds,
            }
        })
        .collect();
    Ok(InterventionReport {
        strategy: strategy.to_string(),
        rows,
    })
}
