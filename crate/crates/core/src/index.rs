//! Lookback-window parent indexing and the candidate edge set derived from it.
//!
//! Observed cascades carry timestamps, not diffusion steps, and the network the
//! content travelled over is unobserved. A user activated within the lookback
//! window before `v` is a potential parent of `v`; every such pair becomes a
//! candidate edge. For a candidate edge `(u, v)`:
//!
//! * `A(u, v)` is the set of cascades in which `u` is a potential parent of `v`;
//! * `B(u, v)` is the set of cascades in which `u` activated and `v` did not
//!   follow within the window (absent, or activated after the window closed).
//!
//! Cascades where `v` activated no later than `u` belong to neither set.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::Cascade;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// How far back a potential parent may lie.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "size", rename_all = "lowercase")]
pub enum Window {
    /// The `n` most recent activations with a strictly earlier timestamp.
    Events(usize),
    /// Activations with timestamp in `[t - w, t)`.
    Time(f64),
}

impl Default for Window {
    fn default() -> Self {
        Window::Events(10)
    }
}

impl Window {
    pub fn validate(self) -> Result<Self> {
        match self {
            Window::Events(0) => Err(Error::domain("event window must be positive")),
            Window::Time(w) if !(w.is_finite() && w > 0.0) => Err(Error::domain(format!(
                "time window {w} must be positive and finite"
            ))),
            ok => Ok(ok),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Window::Events(usize::MAX) => write!(f, "events:inf"),
            Window::Events(n) => write!(f, "events:{n}"),
            Window::Time(w) => write!(f, "time:{w}"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    /// `events:10`, `events:inf` or `time:80`.
    fn from_str(s: &str) -> Result<Self> {
        let (mode, size) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("window `{s}` is not `mode:size`")))?;
        let bad = |e: &dyn fmt::Display| Error::domain(format!("window `{s}`: {e}"));
        let w = match mode {
            "events" if size == "inf" => Window::Events(usize::MAX),
            "events" => Window::Events(size.parse().map_err(|e| bad(&e))?),
            "time" => Window::Time(size.parse().map_err(|e| bad(&e))?),
            other => return Err(bad(&format!("unknown mode `{other}`"))),
        };
        w.validate()
    }
}

/// Which co-occurrences count as failed activation attempts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureRule {
    /// `v` absent, or activated after `u`'s window closed.
    #[default]
    OutsideWindow,
    /// Only cascades in which `v` never activates.
    NeverActivated,
}

/// One cascade with its per-activation potential-parent ranges.
#[derive(Clone, Debug)]
pub struct IndexedCascade {
    users: Vec<NodeId>,
    times: Vec<f64>,
    seed_count: usize,
    parent_lo: Vec<u32>,
    parent_hi: Vec<u32>,
    by_user: Vec<(NodeId, u32)>,
}

impl IndexedCascade {
    fn build(cascade: &Cascade, window: Window) -> Self {
        let users: Vec<NodeId> = cascade.users().collect();
        let times: Vec<f64> = cascade.events().iter().map(|e| e.time).collect();
        let n = users.len();
        let mut parent_lo = vec![0u32; n];
        let mut parent_hi = vec![0u32; n];
        let mut group_start = 0usize;
        for j in 0..n {
            if times[j] != times[group_start] {
                group_start = j;
            }
            let hi = group_start;
            let lo = match window {
                Window::Events(w) => hi.saturating_sub(w),
                Window::Time(w) => {
                    let from = times[j] - w;
                    times[..hi].partition_point(|&t| t < from)
                }
            };
            parent_lo[j] = lo as u32;
            parent_hi[j] = hi as u32;
        }
        let seed_count = times.iter().take_while(|&&t| t == times[0]).count();
        let mut by_user: Vec<(NodeId, u32)> = users
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i as u32))
            .collect();
        by_user.sort_unstable();
        Self {
            users,
            times,
            seed_count,
            parent_lo,
            parent_hi,
            by_user,
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[NodeId] {
        &self.users
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.users[..self.seed_count]
    }

    pub fn is_seed(&self, position: usize) -> bool {
        position < self.seed_count
    }

    /// Positions of the potential parents of the activation at `position`.
    pub fn parent_range(&self, position: usize) -> std::ops::Range<usize> {
        self.parent_lo[position] as usize..self.parent_hi[position] as usize
    }

    pub fn parents(&self, position: usize) -> &[NodeId] {
        &self.users[self.parent_range(position)]
    }

    pub fn position(&self, user: NodeId) -> Option<usize> {
        self.by_user
            .binary_search_by_key(&user, |&(u, _)| u)
            .ok()
            .map(|i| self.by_user[i].1 as usize)
    }

    /// Whether `u` (at `u_pos`) failed to activate `v` (at `v_pos`, if present).
    pub fn is_failure(&self, u_pos: usize, v_pos: Option<usize>, rule: FailureRule) -> bool {
        match (v_pos, rule) {
            (None, _) => true,
            (Some(_), FailureRule::NeverActivated) => false,
            (Some(vp), FailureRule::OutsideWindow) => {
                self.times[vp] > self.times[u_pos] && !self.parent_range(vp).contains(&u_pos)
            }
        }
    }
}

/// Potential parents for every activation of every cascade.
#[derive(Clone, Debug)]
pub struct ActivationIndex {
    window: Window,
    cascades: Vec<IndexedCascade>,
    occurrences: Vec<Vec<u32>>,
}

impl ActivationIndex {
    pub fn build(cascades: &[Cascade], window: Window) -> Result<Self> {
        let window = window.validate()?;
        let indexed: Vec<IndexedCascade> = cascades
            .par_iter()
            .map(|c| IndexedCascade::build(c, window))
            .collect();
        let node_count = indexed
            .iter()
            .flat_map(|c| c.users.iter())
            .map(|u| u.index() + 1)
            .max()
            .unwrap_or(0);
        let mut occurrences = vec![Vec::new(); node_count];
        for (s, c) in indexed.iter().enumerate() {
            for u in &c.users {
                occurrences[u.index()].push(s as u32);
            }
        }
        Ok(Self {
            window,
            cascades: indexed,
            occurrences,
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn cascades(&self) -> &[IndexedCascade] {
        &self.cascades
    }

    pub fn cascade(&self, s: usize) -> &IndexedCascade {
        &self.cascades[s]
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    /// One past the largest node id seen.
    pub fn node_count(&self) -> usize {
        self.occurrences.len()
    }

    /// Cascades in which `user` activates, in index order.
    pub fn occurrences(&self, user: NodeId) -> &[u32] {
        self.occurrences
            .get(user.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `B(u, v)` for an arbitrary ordered pair, candidate or not.
    pub fn failure_cascades(&self, u: NodeId, v: NodeId, rule: FailureRule) -> Vec<u32> {
        self.occurrences(u)
            .iter()
            .copied()
            .filter(|&s| {
                let c = &self.cascades[s as usize];
                let up = c.position(u).expect("occurrence lists are consistent");
                c.is_failure(up, c.position(v), rule)
            })
            .collect()
    }
}

/// Candidate edges (windowed co-activations) with their success cascades.
#[derive(Clone, Debug)]
pub struct CandidateEdgeIndex {
    rule: FailureRule,
    edges: Vec<(NodeId, NodeId)>,
    lookup: HashMap<(NodeId, NodeId), usize>,
    success: Vec<Vec<u32>>,
    child_offsets: Vec<usize>,
    incoming: Vec<Vec<usize>>,
}

impl CandidateEdgeIndex {
    pub fn derive(index: &ActivationIndex, rule: FailureRule) -> Self {
        let mut triples: Vec<(u64, u32)> = Vec::new();
        for (s, c) in index.cascades.iter().enumerate() {
            for j in c.seed_count..c.len() {
                let v = c.users[j].0 as u64;
                for i in c.parent_range(j) {
                    triples.push(((c.users[i].0 as u64) << 32 | v, s as u32));
                }
            }
        }
        triples.sort_unstable();
        let mut edges = Vec::new();
        let mut success: Vec<Vec<u32>> = Vec::new();
        for (key, s) in triples {
            let pair = (NodeId((key >> 32) as u32), NodeId(key as u32));
            if edges.last() != Some(&pair) {
                edges.push(pair);
                success.push(Vec::new());
            }
            let a = success.last_mut().unwrap();
            if a.last() != Some(&s) {
                a.push(s);
            }
        }
        Self::assemble(rule, index.node_count(), edges, success)
    }

    /// An index over a fixed edge universe, e.g. the edges of a fitted model
    /// evaluated on held-out cascades. Success sets are recomputed from `index`.
    pub fn with_edges(
        index: &ActivationIndex,
        rule: FailureRule,
        mut edges: Vec<(NodeId, NodeId)>,
    ) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let lookup: HashMap<(NodeId, NodeId), usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut success = vec![Vec::new(); edges.len()];
        for (s, c) in index.cascades.iter().enumerate() {
            for j in c.seed_count..c.len() {
                for i in c.parent_range(j) {
                    if let Some(&e) = lookup.get(&(c.users[i], c.users[j])) {
                        success[e].push(s as u32);
                    }
                }
            }
        }
        let nodes = edges
            .iter()
            .map(|&(u, v)| u.index().max(v.index()) + 1)
            .max()
            .unwrap_or(0)
            .max(index.node_count());
        Self::assemble(rule, nodes, edges, success)
    }

    fn assemble(
        rule: FailureRule,
        node_count: usize,
        edges: Vec<(NodeId, NodeId)>,
        success: Vec<Vec<u32>>,
    ) -> Self {
        let node_count = edges
            .iter()
            .map(|&(u, v)| u.index().max(v.index()) + 1)
            .max()
            .unwrap_or(0)
            .max(node_count);
        let lookup = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut child_offsets = vec![0usize; node_count + 1];
        let mut incoming = vec![Vec::new(); node_count];
        for (e, &(u, v)) in edges.iter().enumerate() {
            child_offsets[u.index() + 1] += 1;
            incoming[v.index()].push(e);
        }
        for i in 0..node_count {
            child_offsets[i + 1] += child_offsets[i];
        }
        Self {
            rule,
            edges,
            lookup,
            success,
            child_offsets,
            incoming,
        }
    }

    pub fn rule(&self) -> FailureRule {
        self.rule
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.child_offsets.len() - 1
    }

    pub fn edge_id(&self, u: NodeId, v: NodeId) -> Option<usize> {
        self.lookup.get(&(u, v)).copied()
    }

    /// `A(u, v)`, sorted.
    pub fn success_cascades(&self, edge: usize) -> &[u32] {
        &self.success[edge]
    }

    /// `B(u, v)`, sorted. Computed on demand from the activation index.
    pub fn failure_cascades(&self, index: &ActivationIndex, edge: usize) -> Vec<u32> {
        let (u, v) = self.edges[edge];
        index.failure_cascades(u, v, self.rule)
    }

    /// Edge ids leaving `u` (`Ch(u)`), in target order.
    pub fn child_edges(&self, u: NodeId) -> std::ops::Range<usize> {
        if u.index() >= self.node_count() {
            return 0..0;
        }
        self.child_offsets[u.index()]..self.child_offsets[u.index() + 1]
    }

    pub fn children(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.child_edges(u).map(move |e| self.edges[e].1)
    }

    /// Edge ids entering `v` (`Pa(v)`).
    pub fn parent_edges(&self, v: NodeId) -> &[usize] {
        self.incoming
            .get(v.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}
