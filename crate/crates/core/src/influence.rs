//! Influential-user selection by lazy greedy spread maximisation, and
//! relative-appearance statistics of selected users.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{Cascade, Label};
use crate::diffusion::{ComponentParams, IcModel, LiveEdgeGraph, DEFAULT_ROUNDS};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::rng;

/// Incremental set function `σ(S)` for greedy maximisation.
pub trait SpreadOracle: Sync {
    type State: Send + Sync;

    fn node_count(&self) -> usize;

    /// State for `S = ∅`.
    fn empty(&self) -> Self::State;

    /// `σ(S ∪ {v}) − σ(S)`.
    fn gain(&self, state: &Self::State, v: NodeId) -> f64;

    fn insert(&self, state: &mut Self::State, v: NodeId);

    fn spread(&self, state: &Self::State) -> f64;
}

/// Monte Carlo spread over a fixed set of live-edge samples.
///
/// Every evaluation reuses the same samples, so `σ̂` is a coverage function:
/// exactly monotone and submodular. Gains are integer counts scaled by `1/R`.
#[derive(Clone, Debug)]
pub struct MonteCarloSpread {
    model: IcModel,
    samples: Vec<LiveEdgeGraph>,
}

/// Reached nodes per sample and their total count.
#[derive(Clone, Debug)]
pub struct CoverageState {
    reached: Vec<FixedBitSet>,
    covered: u64,
}

impl MonteCarloSpread {
    /// `rounds` samples; sample `r` draws from stream `r` of `rng_seed`.
    pub fn new(model: IcModel, rounds: usize, rng_seed: u64) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::domain("at least one round is required"));
        }
        let samples = (0..rounds)
            .into_par_iter()
            .map(|r| model.sample_live_edges(&mut rng::stream(rng_seed, r as u64)))
            .collect();
        Ok(Self { model, samples })
    }

    pub fn rounds(&self) -> usize {
        self.samples.len()
    }

    fn gain_count(&self, state: &CoverageState, v: NodeId) -> u64 {
        let mut scratch = FixedBitSet::with_capacity(self.model.node_count());
        self.samples
            .iter()
            .zip(&state.reached)
            .map(|(live, reached)| {
                self.model
                    .marginal_reach(live, v.index(), reached, &mut scratch) as u64
            })
            .sum()
    }
}

impl SpreadOracle for MonteCarloSpread {
    type State = CoverageState;

    fn node_count(&self) -> usize {
        self.model.node_count()
    }

    fn empty(&self) -> CoverageState {
        CoverageState {
            reached: vec![FixedBitSet::with_capacity(self.model.node_count()); self.samples.len()],
            covered: 0,
        }
    }

    fn gain(&self, state: &CoverageState, v: NodeId) -> f64 {
        self.gain_count(state, v) as f64 / self.samples.len() as f64
    }

    fn insert(&self, state: &mut CoverageState, v: NodeId) {
        let added: u64 = self
            .samples
            .par_iter()
            .zip(state.reached.par_iter_mut())
            .map(|(live, reached)| self.model.extend_reach(live, v.index(), reached) as u64)
            .sum();
        state.covered += added;
    }

    fn spread(&self, state: &CoverageState) -> f64 {
        state.covered as f64 / self.samples.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankedNode {
    pub node: NodeId,
    pub marginal_gain: f64,
    /// Spread of the first `rank` selections.
    pub cumulative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfluencerRanking {
    pub component: String,
    pub entries: Vec<RankedNode>,
    pub rounds: usize,
}

impl InfluencerRanking {
    pub fn nodes(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }
}

/// Heap entry ordered by gain, then by smaller node index.
struct Candidate {
    gain: f64,
    node: u32,
    /// Selection count at which `gain` was computed.
    fresh_at: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// CELF lazy greedy: a popped gain is recomputed once if stale and reinserted,
/// otherwise selected. Ties go to the smaller node index.
///
/// Returns `(node, gain, spread after adding)` per selection. Asking for more
/// nodes than exist truncates with a warning.
pub fn lazy_greedy<O: SpreadOracle>(oracle: &O, k: usize) -> Vec<RankedNode> {
    let n = oracle.node_count();
    if k > n {
        log::warn!("requested {k} influencers from {n} nodes; ranking truncated");
    }
    let mut state = oracle.empty();
    let initial: Vec<f64> = (0..n as u32)
        .into_par_iter()
        .map(|v| oracle.gain(&state, NodeId(v)))
        .collect();
    let mut heap: BinaryHeap<Candidate> = initial
        .into_iter()
        .enumerate()
        .map(|(v, gain)| Candidate {
            gain,
            node: v as u32,
            fresh_at: 0,
        })
        .collect();
    let mut out = Vec::with_capacity(k.min(n));
    while out.len() < k {
        let Some(top) = heap.pop() else { break };
        if top.fresh_at == out.len() {
            let v = NodeId(top.node);
            oracle.insert(&mut state, v);
            out.push(RankedNode {
                node: v,
                marginal_gain: top.gain,
                cumulative: oracle.spread(&state),
            });
        } else {
            heap.push(Candidate {
                gain: oracle.gain(&state, NodeId(top.node)),
                node: top.node,
                fresh_at: out.len(),
            });
        }
    }
    out
}

/// Top-`k` influencers of one component under Monte Carlo spread.
pub fn greedy_influencers(
    graph: &DirectedGraph,
    params: &ComponentParams,
    k: usize,
    rounds: usize,
    rng_seed: u64,
    component: &str,
) -> Result<InfluencerRanking> {
    if k == 0 {
        return Err(Error::domain("K must be at least 1"));
    }
    let oracle = MonteCarloSpread::new(IcModel::new(graph, params)?, rounds, rng_seed)?;
    Ok(InfluencerRanking {
        component: component.to_string(),
        entries: lazy_greedy(&oracle, k),
        rounds: oracle.rounds(),
    })
}

/// Default Monte Carlo rounds per spread estimate.
pub const DEFAULT_INFLUENCE_ROUNDS: usize = DEFAULT_ROUNDS;

/// Default number of influencers per component.
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AppearanceRow {
    pub node: NodeId,
    pub fake: usize,
    pub truth: usize,
    /// `100 · fake / (fake + true)`; absent when the node appears in neither.
    pub fake_pct: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    /// Quartiles by linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppearanceStats {
    pub rows: Vec<AppearanceRow>,
}

impl AppearanceStats {
    /// Summary of the defined percentages.
    pub fn summary(&self) -> Option<Summary> {
        let pcts: Vec<f64> = self.rows.iter().filter_map(|r| r.fake_pct).collect();
        Summary::of(&pcts)
    }
}

/// Per node, the number of fake and true cascades it appears in. Cascades
/// without a true/fake label are ignored.
pub fn appearance_stats(nodes: &[NodeId], cascades: &[Cascade]) -> AppearanceStats {
    let mut counts: BTreeMap<NodeId, [usize; 2]> = nodes.iter().map(|&n| (n, [0, 0])).collect();
    for c in cascades {
        let slot = match c.label() {
            Some(Label::Fake) => 0,
            Some(Label::True) => 1,
            _ => continue,
        };
        for u in c.users() {
            if let Some(cnt) = counts.get_mut(&u) {
                cnt[slot] += 1;
            }
        }
    }
    AppearanceStats {
        rows: nodes
            .iter()
            .map(|n| {
                let [fake, truth] = counts[n];
                AppearanceRow {
                    node: *n,
                    fake,
                    truth,
                    fake_pct: (fake + truth > 0)
                        .then(|| 100.0 * fake as f64 / (fake + truth) as f64),
                }
            })
            .collect(),
    }
}
