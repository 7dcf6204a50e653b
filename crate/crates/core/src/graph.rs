//! Directed graphs over interned user identifiers, follower-graph ingestion, and
//! per-cascade retweet forests.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::cascade::Cascade;
use crate::error::{Error, Result};

/// Dense index of an interned user identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index of an edge in a [`DirectedGraph`]'s sorted edge list.
pub type EdgeId = usize;

/// Maps opaque user identifiers to dense [`NodeId`]s in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut interner = Self::new();
        for name in names {
            interner.intern(name.as_ref());
        }
        interner
    }

    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len() as u32).map(NodeId)
    }
}

/// Immutable directed graph with optional per-edge probabilities.
///
/// Every interned name is a node, so a graph built on top of a cascade set's
/// interner shares its node ids. Edges are kept sorted by `(source, target)`;
/// an [`EdgeId`] is a position in that order.
#[derive(Clone, Debug)]
pub struct DirectedGraph {
    names: Interner,
    edges: Vec<(NodeId, NodeId)>,
    weights: Vec<Option<f64>>,
    lookup: HashMap<(NodeId, NodeId), EdgeId>,
    out_offsets: Vec<usize>,
}

/// Accumulates nodes and edges, rejecting self-loops and out-of-range weights.
/// Duplicate edges keep the first occurrence.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    names: Interner,
    edges: BTreeMap<(NodeId, NodeId), Option<f64>>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_interner(names: Interner) -> Self {
        Self {
            names,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, name: &str) -> NodeId {
        self.names.intern(name)
    }

    pub fn add_named_edge(&mut self, u: &str, v: &str, weight: Option<f64>) -> Result<bool> {
        let u = self.names.intern(u);
        let v = self.names.intern(v);
        self.add_edge(u, v, weight)
    }

    /// Returns `false` when the edge was already present.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, weight: Option<f64>) -> Result<bool> {
        if u.index() >= self.names.len() || v.index() >= self.names.len() {
            return Err(Error::domain(format!(
                "edge ({}, {}) references an unregistered node",
                u.0, v.0
            )));
        }
        if u == v {
            return Err(Error::domain(format!(
                "self-loop on `{}`",
                self.names.name(u)
            )));
        }
        if let Some(w) = weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::domain(format!("edge weight {w} outside [0, 1]")));
            }
        }
        match self.edges.entry((u, v)) {
            std::collections::btree_map::Entry::Occupied(_) => Ok(false),
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(weight);
                Ok(true)
            }
        }
    }

    pub fn build(self) -> DirectedGraph {
        let n = self.names.len();
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut weights = Vec::with_capacity(self.edges.len());
        let mut lookup = HashMap::with_capacity(self.edges.len());
        let mut out_offsets = vec![0usize; n + 1];
        for (i, (&(u, v), &w)) in self.edges.iter().enumerate() {
            edges.push((u, v));
            weights.push(w);
            lookup.insert((u, v), i);
            out_offsets[u.index() + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        DirectedGraph {
            names: self.names,
            edges,
            weights,
            lookup,
            out_offsets,
        }
    }
}

impl DirectedGraph {
    /// Parses a whitespace-separated edge list: `source target [weight]` per line.
    /// Blank lines and lines starting with `#` are skipped. When `directed` is false
    /// each line contributes both orientations.
    pub fn parse_edge_list(source: &str, directed: bool) -> Result<Self> {
        Self::parse_edge_list_with(source, directed, Interner::new())
    }

    /// Like [`parse_edge_list`](Self::parse_edge_list), but extends an existing
    /// interner so node ids agree with data already ingested against it.
    pub fn parse_edge_list_with(source: &str, directed: bool, names: Interner) -> Result<Self> {
        let mut builder = GraphBuilder::with_interner(names);
        for (i, raw) in source.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if !(2..=3).contains(&cols.len()) {
                return Err(Error::parse(
                    line_no,
                    format!("expected 2 or 3 columns, found {}", cols.len()),
                ));
            }
            let weight = match cols.get(2) {
                Some(w) => Some(
                    w.parse::<f64>()
                        .map_err(|e| Error::parse(line_no, format!("bad weight `{w}`: {e}")))?,
                ),
                None => None,
            };
            let add = |b: &mut GraphBuilder, u: &str, v: &str| {
                b.add_named_edge(u, v, weight).map_err(|e| match e {
                    Error::Domain(msg) => Error::Domain(format!("line {line_no}: {msg}")),
                    other => other,
                })
            };
            add(&mut builder, cols[0], cols[1])?;
            if !directed {
                add(&mut builder, cols[1], cols[0])?;
            }
        }
        Ok(builder.build())
    }

    pub fn read_edge_list(path: impl AsRef<Path>, directed: bool, names: Interner) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_edge_list_with(&text, directed, names)
    }

    /// Tab-separated serialization readable by [`parse_edge_list`](Self::parse_edge_list).
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let _ = write!(out, "{}\t{}", self.names.name(u), self.names.name(v));
            if let Some(w) = self.weights[e] {
                let _ = write!(out, "\t{w}");
            }
            out.push('\n');
        }
        out
    }

    pub fn names(&self) -> &Interner {
        &self.names
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn weight(&self, e: EdgeId) -> Option<f64> {
        self.weights[e]
    }

    pub fn edge_id(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.lookup.get(&(u, v)).copied()
    }

    pub fn contains_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.lookup.contains_key(&(u, v))
    }

    /// Edge ids leaving `u`, in target order.
    pub fn out_edge_ids(&self, u: NodeId) -> std::ops::Range<EdgeId> {
        if u.index() >= self.node_count() {
            return 0..0;
        }
        self.out_offsets[u.index()]..self.out_offsets[u.index() + 1]
    }

    pub fn successors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edge_ids(u).map(move |e| self.edges[e].1)
    }
}

/// Per-cascade attribution forest: each engaged user points to the followee who
/// engaged most recently before them.
#[derive(Clone, Debug, PartialEq)]
pub struct RetweetGraph {
    cascade_id: String,
    nodes: Vec<NodeId>,
    parent: Vec<Option<usize>>,
}

impl RetweetGraph {
    /// Builds a forest from explicit `(parent, child)` edges over `nodes`, which
    /// must be listed in activation order.
    pub fn from_edges(
        cascade_id: impl Into<String>,
        nodes: Vec<NodeId>,
        edges: &[(NodeId, NodeId)],
    ) -> Result<Self> {
        let position: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        if position.len() != nodes.len() {
            return Err(Error::domain("retweet graph nodes must be distinct"));
        }
        let mut parent = vec![None; nodes.len()];
        for &(p, c) in edges {
            let (Some(&pi), Some(&ci)) = (position.get(&p), position.get(&c)) else {
                return Err(Error::domain(
                    "retweet edge endpoint is not an engaged user",
                ));
            };
            if pi >= ci {
                return Err(Error::domain("retweet parent must engage before its child"));
            }
            if parent[ci].replace(pi).is_some() {
                return Err(Error::domain("retweet child has more than one parent"));
            }
        }
        Ok(Self {
            cascade_id: cascade_id.into(),
            nodes,
            parent,
        })
    }

    pub fn cascade_id(&self) -> &str {
        &self.cascade_id
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn parent_of(&self, position: usize) -> Option<NodeId> {
        self.parent[position].map(|p| self.nodes[p])
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (self.nodes[p], self.nodes[c])))
    }

    pub fn edge_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    pub fn roots(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.parent
            .iter()
            .zip(&self.nodes)
            .filter(|(p, _)| p.is_none())
            .map(|(_, &n)| n)
    }
}

/// Attributes each engagement to the latest earlier engagement by a followee.
///
/// `followers` holds `(a, b)` when `a` follows `b`. Events are already in strict
/// order (ties resolved by ingestion order), so "earlier" is positional.
pub fn build_retweet_graph(cascade: &Cascade, followers: &DirectedGraph) -> RetweetGraph {
    let nodes: Vec<NodeId> = cascade.events().iter().map(|e| e.user).collect();
    let position: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let parent = nodes
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            followers
                .successors(a)
                .filter_map(|b| position.get(&b).copied())
                .filter(|&pb| pb < i)
                .max()
        })
        .collect();
    RetweetGraph {
        cascade_id: cascade.id().to_owned(),
        nodes,
        parent,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentStats {
    pub cc_count: usize,
    /// `cc_count / n_engagements`.
    pub proportion: f64,
}

/// Weakly connected components of a retweet graph, isolated users included.
pub fn weak_component_stats(graph: &RetweetGraph, n_engagements: usize) -> Result<ComponentStats> {
    if n_engagements == 0 {
        return Err(Error::domain(
            "component proportion needs at least one engagement",
        ));
    }
    if n_engagements < graph.nodes.len() {
        return Err(Error::domain(format!(
            "{} engagements cannot cover {} engaged users",
            n_engagements,
            graph.nodes.len()
        )));
    }
    let mut uf = UnionFind::<usize>::new(graph.nodes.len());
    for (c, p) in graph.parent.iter().enumerate() {
        if let Some(p) = *p {
            uf.union(p, c);
        }
    }
    let cc_count = (0..graph.nodes.len()).filter(|&i| uf.find(i) == i).count();
    Ok(ComponentStats {
        cc_count,
        proportion: cc_count as f64 / n_engagements as f64,
    })
}
