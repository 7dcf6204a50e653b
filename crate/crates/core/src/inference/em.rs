use rand::Rng;
use rayon::prelude::*;

use super::EPS_P;
use crate::diffusion::{ComponentParams, MixtureParams};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::index::{ActivationIndex, CandidateEdgeIndex};
use crate::rng;

/// Below this fraction of `G_u` the failure mass of an edge is treated as zero.
const FAILURE_MASS_FLOOR: f64 = 1e-12;

/// Likelihood terms of one cascade, laid out for repeated evaluation.
#[derive(Clone, Debug, Default)]
struct CascadeTerms {
    /// Every activated user (seeds included).
    users: Vec<u32>,
    /// Non-seed activations with at least one potential parent.
    act_user: Vec<NodeId>,
    act_offsets: Vec<u32>,
    act_edges: Vec<u32>,
    /// Parent pairs outside the edge universe; they count as `EPS_P`.
    act_missing: Vec<u32>,
    /// Edges `(u, v)` with `u` active whose cascade is not in `B(u, v)`.
    excluded: Vec<u32>,
}

impl CascadeTerms {
    fn activations(&self) -> impl Iterator<Item = (&[u32], u32)> + '_ {
        (0..self.act_user.len()).map(move |a| {
            let r = self.act_offsets[a] as usize..self.act_offsets[a + 1] as usize;
            (&self.act_edges[r], self.act_missing[a])
        })
    }

    fn build(index: &ActivationIndex, cands: &CandidateEdgeIndex, s: usize) -> Self {
        let c = index.cascade(s);
        let rule = cands.rule();
        let mut t = CascadeTerms {
            users: c.users().iter().map(|u| u.0).collect(),
            act_offsets: vec![0],
            ..Default::default()
        };
        for j in c.seed_count()..c.len() {
            let range = c.parent_range(j);
            if range.is_empty() {
                continue;
            }
            let v = c.users()[j];
            let mut missing = 0;
            for &u in &c.users()[range] {
                match cands.edge_id(u, v) {
                    Some(e) => t.act_edges.push(e as u32),
                    None => missing += 1,
                }
            }
            t.act_user.push(v);
            t.act_missing.push(missing);
            t.act_offsets.push(t.act_edges.len() as u32);
        }
        for (up, &u) in c.users().iter().enumerate() {
            let children = cands.child_edges(u);
            if children.len() <= c.len() {
                for e in children {
                    let vp = c.position(cands.edges()[e].1);
                    if vp.is_some() && !c.is_failure(up, vp, rule) {
                        t.excluded.push(e as u32);
                    }
                }
            } else {
                for (vp, &v) in c.users().iter().enumerate() {
                    if let Some(e) = cands.edge_id(u, v) {
                        if !c.is_failure(up, Some(vp), rule) {
                            t.excluded.push(e as u32);
                        }
                    }
                }
            }
        }
        t
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(EPS_P, 1.0 - EPS_P)
}

/// `ln(1 − ∏(1 − p_e))` for one activation.
fn log_activation(edges: &[u32], missing: u32, log_fail: &[f64]) -> f64 {
    let mut sum = missing as f64 * (-EPS_P).ln_1p();
    for &e in edges {
        sum += log_fail[e as usize];
    }
    (-sum.exp_m1()).ln()
}

/// Normalised `exp(x_i)` and `ln Σ exp(x_i)` with max subtraction. The sum is
/// taken in sorted order so neither result depends on component order. Returns
/// no weights when every `x_i` is `−∞`.
fn softmax(xs: &[f64], scratch: &mut Vec<f64>) -> (Vec<f64>, f64) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (Vec::new(), max);
    }
    let w: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    scratch.clear();
    scratch.extend_from_slice(&w);
    scratch.sort_by(f64::total_cmp);
    let total: f64 = scratch.iter().sum();
    (w.iter().map(|x| x / total).collect(), max + total.ln())
}

/// Per-cascade component responsibilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorAssignment {
    k: usize,
    gamma: Vec<f64>,
    degenerate: Vec<usize>,
}

impl PosteriorAssignment {
    /// Row-major `n × k` responsibilities.
    pub fn from_rows(k: usize, gamma: Vec<f64>) -> Result<Self> {
        if k == 0 || gamma.len() % k != 0 {
            return Err(Error::domain("responsibility matrix is not n × k"));
        }
        for row in gamma.chunks(k) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|g| !(0.0..=1.0).contains(g)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::domain("responsibility rows must be distributions"));
            }
        }
        Ok(Self {
            k,
            gamma,
            degenerate: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.gamma.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.gamma[s * self.k..(s + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.gamma.chunks(self.k)
    }

    /// Cascades where every component had zero likelihood; their rows are `π̂`.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    /// `argmax_M γ_s^M`, lowest index on ties.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.rows()
            .map(|r| {
                let mut best = 0;
                for (m, &g) in r.iter().enumerate() {
                    if g > r[best] {
                        best = m;
                    }
                }
                best
            })
            .collect()
    }

    /// Posterior with component columns reordered like [`MixtureParams::permuted`].
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            k: self.k,
            gamma: self
                .rows()
                .flat_map(|r| order.iter().map(move |&i| r[i]))
                .collect(),
            degenerate: self.degenerate.clone(),
        }
    }
}

/// Current estimate and traces of one EM run.
#[derive(Clone, Debug)]
pub struct EmState {
    pi: Vec<f64>,
    probs: Vec<Vec<f64>>,
    tied: bool,
    loglik: Vec<f64>,
    iteration: usize,
    nll_trace: Vec<f64>,
    q_trace: Vec<f64>,
    converged: bool,
    warnings: Vec<String>,
}

impl EmState {
    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.pi
    }

    /// Edge probabilities of component `m`, aligned with [`Em::edges`].
    pub fn probs(&self, m: usize) -> &[f64] {
        &self.probs[m]
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    /// Number of E-steps so far; equals the trace length.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Observed-data NLL per cascade at each E-step.
    pub fn nll_trace(&self) -> &[f64] {
        &self.nll_trace
    }

    /// Expected complete-data log-likelihood per cascade, `Σ_M γ (ln π + ℓ)`, at each E-step.
    pub fn q_trace(&self) -> &[f64] {
        &self.q_trace
    }

    pub fn nll(&self) -> Option<f64> {
        self.nll_trace.last().copied()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub(crate) fn set_converged(&mut self, converged: bool) {
        self.converged = converged;
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `ℓ_s^M` from the latest E-step.
    pub fn log_likelihood(&self, s: usize, m: usize) -> f64 {
        self.loglik[s * self.k() + m]
    }
}

/// Compiled EM problem over a fixed cascade set and edge universe.
#[derive(Clone, Debug)]
pub struct Em {
    edges: Vec<(NodeId, NodeId)>,
    edge_src: Vec<u32>,
    node_count: usize,
    cascades: Vec<CascadeTerms>,
}

impl Em {
    pub fn new(index: &ActivationIndex, cands: &CandidateEdgeIndex) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::domain("no cascades to fit"));
        }
        let cascades = (0..index.len())
            .into_par_iter()
            .map(|s| CascadeTerms::build(index, cands, s))
            .collect();
        Ok(Self {
            edges: cands.edges().to_vec(),
            edge_src: cands.edges().iter().map(|e| e.0 .0).collect(),
            node_count: cands.node_count().max(index.node_count()),
            cascades,
        })
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn cascade_count(&self) -> usize {
        self.cascades.len()
    }

    /// State from explicit parameters. Every edge of the universe needs a value;
    /// parameters on other edges are ignored.
    pub fn state_from(&self, params: &MixtureParams, tied: bool) -> Result<EmState> {
        let mut probs = Vec::with_capacity(params.k());
        for (m, c) in params.components().iter().enumerate() {
            let p = self
                .edges
                .iter()
                .map(|&(u, v)| {
                    c.get(u, v).map(clamp).ok_or_else(|| {
                        Error::domain(format!(
                            "component {m} has no parameter for edge ({}, {})",
                            u.0, v.0
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            probs.push(p);
        }
        Ok(self.fresh_state(params.weights().to_vec(), probs, tied))
    }

    /// Random start: `π^0 ~ U[0.25, 0.75]` (normalised for k > 2), edge values
    /// `~ U[0.05, 0.95]` with one stream per component. Tied states draw one
    /// scalar per component.
    pub fn random_state(&self, k: usize, seed: u64, tied: bool) -> Result<EmState> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        let mut r = rng::stream(seed, 0);
        let pi = match k {
            1 => vec![1.0],
            2 => {
                let a = r.random_range(0.25..=0.75);
                vec![a, 1.0 - a]
            }
            _ => {
                let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.25..=0.75)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|w| w / total).collect()
            }
        };
        let probs = (0..k)
            .map(|m| {
                let mut r = rng::stream(seed, m as u64 + 1);
                if tied {
                    vec![r.random_range(0.05..=0.95); self.edges.len()]
                } else {
                    (0..self.edges.len())
                        .map(|_| r.random_range(0.05..=0.95))
                        .collect()
                }
            })
            .collect();
        Ok(self.fresh_state(pi, probs, tied))
    }

    fn fresh_state(&self, pi: Vec<f64>, probs: Vec<Vec<f64>>, tied: bool) -> EmState {
        EmState {
            loglik: vec![0.0; self.cascades.len() * pi.len()],
            pi,
            probs,
            tied,
            iteration: 0,
            nll_trace: Vec::new(),
            q_trace: Vec::new(),
            converged: false,
            warnings: Vec::new(),
        }
    }

    /// Current estimate as model parameters.
    pub fn mixture(&self, state: &EmState) -> MixtureParams {
        let components = state
            .probs
            .iter()
            .map(|p| ComponentParams::from_edges(self.edges.iter().copied().zip(p.iter().copied())))
            .collect::<Result<Vec<_>>>()
            .expect("clamped probabilities");
        MixtureParams::new(state.pi.clone(), components).expect("normalised weights")
    }

    /// `1 − ∏_{u ∈ parents(v)} (1 − p_uv)` in cascade `s` under component `m`.
    pub fn activation_probability(
        &self,
        state: &EmState,
        s: usize,
        v: NodeId,
        m: usize,
    ) -> Result<f64> {
        let t = self
            .cascades
            .get(s)
            .ok_or_else(|| Error::domain(format!("cascade {s} out of range")))?;
        if m >= state.k() {
            return Err(Error::domain(format!("component {m} out of range")));
        }
        let a = t.act_user.iter().position(|&u| u == v).ok_or_else(|| {
            if t.users.contains(&v.0) {
                Error::domain(format!(
                    "node {} is a seed or has no potential parent in cascade {s}",
                    v.0
                ))
            } else {
                Error::domain(format!("node {} is not active in cascade {s}", v.0))
            }
        })?;
        let log_fail = self.log_fail(&state.probs[m]);
        let (edges, missing) = t.activations().nth(a).expect("activation exists");
        Ok(log_activation(edges, missing, &log_fail).exp())
    }

    fn log_fail(&self, probs: &[f64]) -> Vec<f64> {
        probs.iter().map(|&p| (-p).ln_1p()).collect()
    }

    /// `Σ_u ln(1 − p_e)` over each node's outgoing edges.
    fn node_fail(&self, log_fail: &[f64]) -> Vec<f64> {
        let mut l = vec![0.0; self.node_count];
        for (e, &u) in self.edge_src.iter().enumerate() {
            l[u as usize] += log_fail[e];
        }
        l
    }

    fn terms_log_likelihood(t: &CascadeTerms, log_fail: &[f64], node_fail: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (edges, missing) in t.activations() {
            ll += log_activation(edges, missing, log_fail);
        }
        let mut fail = 0.0;
        for &u in &t.users {
            fail += node_fail[u as usize];
        }
        for &e in &t.excluded {
            fail -= log_fail[e as usize];
        }
        // the remaining failure mass is a sum of non-positive terms
        ll + fail.min(0.0)
    }

    /// `ℓ_s^M = Σ_{non-seed v} ln p_s(v) + Σ_{(u,v): s ∈ B(u,v)} ln(1 − p_uv)`.
    pub fn cascade_log_likelihood(&self, state: &EmState, s: usize, m: usize) -> f64 {
        let log_fail = self.log_fail(&state.probs[m]);
        let node_fail = self.node_fail(&log_fail);
        Self::terms_log_likelihood(&self.cascades[s], &log_fail, &node_fail)
    }

    /// Recomputes `ℓ`, appends to the traces and returns the responsibilities.
    pub fn e_step(&self, state: &mut EmState) -> PosteriorAssignment {
        let k = state.k();
        let per_comp: Vec<(Vec<f64>, Vec<f64>)> = state
            .probs
            .iter()
            .map(|p| {
                let lf = self.log_fail(p);
                let nf = self.node_fail(&lf);
                (lf, nf)
            })
            .collect();
        let log_pi: Vec<f64> = state.pi.iter().map(|p| p.ln()).collect();
        let rows: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = self
            .cascades
            .par_iter()
            .map_init(Vec::new, |scratch, t| {
                let ll: Vec<f64> = per_comp
                    .iter()
                    .map(|(lf, nf)| Self::terms_log_likelihood(t, lf, nf))
                    .collect();
                let joint: Vec<f64> = ll.iter().zip(&log_pi).map(|(l, p)| l + p).collect();
                let (gamma, lse) = softmax(&joint, scratch);
                let q = gamma
                    .iter()
                    .zip(&joint)
                    .filter(|(g, _)| **g > 0.0)
                    .map(|(g, j)| g * j)
                    .sum();
                (ll, gamma, lse, q)
            })
            .collect();
        let n = rows.len();
        let mut gamma = Vec::with_capacity(n * k);
        let mut degenerate = Vec::new();
        let (mut nll, mut q) = (0.0, 0.0);
        for (s, (ll, g, lse, qs)) in rows.into_iter().enumerate() {
            state.loglik[s * k..(s + 1) * k].copy_from_slice(&ll);
            if g.is_empty() {
                degenerate.push(s);
                gamma.extend_from_slice(&state.pi);
            } else {
                gamma.extend(g);
            }
            nll -= lse;
            q += qs;
        }
        if !degenerate.is_empty() {
            state.warnings.push(format!(
                "iteration {}: {} cascade(s) have zero likelihood under every component; responsibilities set to the weights",
                state.iteration,
                degenerate.len()
            ));
        }
        state.iteration += 1;
        state.nll_trace.push(nll / n as f64);
        state.q_trace.push(q / n as f64);
        PosteriorAssignment {
            k,
            gamma,
            degenerate,
        }
    }

    /// Updates `π̂` and the edge parameters from `posterior`.
    pub fn m_step(&self, state: &mut EmState, posterior: &PosteriorAssignment) -> Result<()> {
        let k = state.k();
        if posterior.k != k || posterior.len() != self.cascades.len() {
            return Err(Error::domain("posterior does not match the EM state"));
        }
        let n = self.cascades.len() as f64;
        let mut pi: Vec<f64> = (0..k)
            .map(|m| posterior.rows().map(|r| r[m]).sum::<f64>() / n)
            .collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|w| *w /= total);

        let tied = state.tied;
        let updates: Vec<(Vec<f64>, usize)> = (0..k)
            .into_par_iter()
            .map(|m| self.update_component(&state.probs[m], posterior, m, tied))
            .collect();
        for (m, (probs, kept)) in updates.into_iter().enumerate() {
            if kept > 0 {
                state.warnings.push(format!(
                    "iteration {}: component {m} kept {kept} edge value(s) with zero responsibility mass",
                    state.iteration
                ));
            }
            state.probs[m] = probs;
        }
        state.pi = pi;
        Ok(())
    }

    fn update_component(
        &self,
        probs: &[f64],
        posterior: &PosteriorAssignment,
        m: usize,
        tied: bool,
    ) -> (Vec<f64>, usize) {
        let n_edges = self.edges.len();
        let log_fail = self.log_fail(probs);
        let mut num = vec![0.0; n_edges];
        let mut den_a = vec![0.0; n_edges];
        let mut excl = vec![0.0; n_edges];
        let mut mass = vec![0.0; self.node_count];
        for (t, row) in self.cascades.iter().zip(posterior.rows()) {
            let g = row[m];
            if g == 0.0 {
                continue;
            }
            for &u in &t.users {
                mass[u as usize] += g;
            }
            for (edges, missing) in t.activations() {
                let ps = log_activation(edges, missing, &log_fail).exp();
                for &e in edges {
                    let e = e as usize;
                    num[e] += g * probs[e] / ps;
                    den_a[e] += g;
                }
            }
            for &e in &t.excluded {
                excl[e as usize] += g;
            }
        }
        let den: Vec<f64> = (0..n_edges)
            .map(|e| {
                let g_u = mass[self.edge_src[e] as usize];
                let b = g_u - excl[e];
                den_a[e]
                    + if b <= FAILURE_MASS_FLOOR * g_u {
                        0.0
                    } else {
                        b
                    }
            })
            .collect();
        if tied {
            let (a, d) = num
                .iter()
                .zip(&den)
                .fold((0.0, 0.0), |(a, d), (x, y)| (a + x, d + y));
            if d > 0.0 {
                (vec![clamp(a / d); n_edges], 0)
            } else {
                (probs.to_vec(), usize::from(n_edges > 0))
            }
        } else {
            let mut kept = 0;
            let next = (0..n_edges)
                .map(|e| {
                    if den[e] > 0.0 {
                        clamp(num[e] / den[e])
                    } else {
                        kept += 1;
                        probs[e]
                    }
                })
                .collect();
            (next, kept)
        }
    }

    /// One E-step followed by one M-step.
    pub fn step(&self, state: &mut EmState) -> Result<PosteriorAssignment> {
        let post = self.e_step(state);
        self.m_step(state, &post)?;
        Ok(post)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{Cascade, Event};
    use crate::index::{FailureRule, Window};
    use approx::assert_relative_eq;

    fn cascade(id: &str, ev: &[(u32, f64)]) -> Cascade {
        Cascade::new(
            id,
            None,
            ev.iter()
                .map(|&(u, t)| Event {
                    user: NodeId(u),
                    time: t,
                })
                .collect(),
        )
        .unwrap()
    }

    fn problem(cs: &[Cascade]) -> (ActivationIndex, CandidateEdgeIndex, Em) {
        let idx = ActivationIndex::build(cs, Window::Events(10)).unwrap();
        let cands = CandidateEdgeIndex::derive(&idx, FailureRule::OutsideWindow);
        let em = Em::new(&idx, &cands).unwrap();
        (idx, cands, em)
    }

    fn with_probs(em: &Em, pi: &[f64], probs: &[&[f64]]) -> EmState {
        em.fresh_state(
            pi.to_vec(),
            probs.iter().map(|p| p.to_vec()).collect(),
            false,
        )
    }

    #[test]
    fn activation_probability_examples() {
        // v=3 has parents 0, 1, 2
        let cs = [cascade("a", &[(0, 0.0), (1, 1.0), (2, 2.0), (3, 3.0)])];
        let (_, cands, em) = problem(&cs);
        let mut p = vec![0.5; cands.len()];
        p[cands.edge_id(NodeId(0), NodeId(3)).unwrap()] = 0.2;
        p[cands.edge_id(NodeId(1), NodeId(3)).unwrap()] = 0.3;
        p[cands.edge_id(NodeId(2), NodeId(3)).unwrap()] = 0.5;
        let st = with_probs(&em, &[1.0], &[&p]);
        assert_relative_eq!(
            em.activation_probability(&st, 0, NodeId(3), 0).unwrap(),
            0.72,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            em.activation_probability(&st, 0, NodeId(2), 0).unwrap(),
            0.75,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            em.activation_probability(&st, 0, NodeId(1), 0).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(em.activation_probability(&st, 0, NodeId(0), 0).is_err());
        assert!(em.activation_probability(&st, 0, NodeId(9), 0).is_err());
    }

    #[test]
    fn seed_only_cascade_with_failed_child() {
        let cs = [
            cascade("c1", &[(0, 0.0), (1, 1.0)]),
            cascade("c2", &[(0, 0.0)]),
        ];
        let (_, _, em) = problem(&cs);
        let st = with_probs(&em, &[1.0], &[&[0.5]]);
        assert_relative_eq!(
            em.cascade_log_likelihood(&st, 1, 0),
            0.5f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            em.cascade_log_likelihood(&st, 0, 0),
            0.5f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn activation_plus_failure() {
        // c3: 0 activates 1, then 3 follows 1 over a pair the universe lacks
        let cs = [
            cascade("c1", &[(0, 0.0), (1, 1.0)]),
            cascade("c2", &[(0, 0.0), (2, 1.0)]),
            cascade("c3", &[(0, 0.0), (1, 1.0), (3, 2.0)]),
        ];
        let idx = ActivationIndex::build(&cs, Window::Events(1)).unwrap();
        let cands = CandidateEdgeIndex::with_edges(
            &idx,
            FailureRule::OutsideWindow,
            vec![(NodeId(0), NodeId(1)), (NodeId(0), NodeId(2))],
        );
        let em = Em::new(&idx, &cands).unwrap();
        let st = with_probs(&em, &[1.0], &[&[0.5, 0.5]]);
        // seed 0, child 1 activated via the sole edge, child 2 in B; node 3's parent pair is outside the universe
        let expected = 2.0 * 0.5f64.ln() + EPS_P.ln();
        assert_relative_eq!(
            em.cascade_log_likelihood(&st, 2, 0),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn e_step_examples() {
        let cs = [
            cascade("c1", &[(0, 0.0), (1, 1.0)]),
            cascade("c2", &[(0, 0.0)]),
        ];
        let (_, _, em) = problem(&cs);
        let mut st = with_probs(&em, &[0.5, 0.5], &[&[0.3], &[0.3]]);
        let post = em.e_step(&mut st);
        assert_eq!(post.row(0), &[0.5, 0.5]);

        // P(c1; T) = 0.2 · (seed contributes 1), P(c1; F) = 0.1
        let mut st = with_probs(&em, &[0.5, 0.5], &[&[0.2], &[0.1]]);
        let post = em.e_step(&mut st);
        assert_relative_eq!(post.row(0)[0], 2.0 / 3.0, epsilon = 1e-12);

        let mut st = with_probs(&em, &[1.0, 0.0], &[&[0.2], &[0.9]]);
        let post = em.e_step(&mut st);
        assert!(post.rows().all(|r| r == [1.0, 0.0]));
        assert_eq!(st.iteration(), 1);
        assert_eq!(st.nll_trace().len(), 1);
    }

    #[test]
    fn m_step_examples() {
        let cs = [
            cascade("c1", &[(0, 0.0), (1, 1.0)]),
            cascade("c2", &[(0, 0.0)]),
        ];
        let (_, _, em) = problem(&cs);
        let post = PosteriorAssignment::from_rows(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut st = with_probs(&em, &[0.3, 0.7], &[&[0.4], &[0.4]]);
        em.m_step(&mut st, &post).unwrap();
        assert_eq!(st.weights(), &[0.5, 0.5]);
        // component 0 only sees the success, component 1 only the failure
        assert_relative_eq!(st.probs(0)[0], 1.0 - EPS_P);
        assert_relative_eq!(st.probs(1)[0], EPS_P);

        let post = PosteriorAssignment::from_rows(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let mut st = with_probs(&em, &[0.5, 0.5], &[&[0.4], &[0.4]]);
        em.m_step(&mut st, &post).unwrap();
        assert_relative_eq!(st.probs(0)[0], 0.5, epsilon = 1e-12);
        // no mass for component 1: value kept, warning recorded
        assert_eq!(st.probs(1)[0], 0.4);
        assert_eq!(st.warnings().len(), 1);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let cs: Vec<Cascade> = (0..30)
            .map(|i| {
                cascade(
                    &format!("c{i}"),
                    &[(i % 4, 0.0), ((i + 1) % 4, 1.0), ((i + 2) % 5 + 4, 2.0)],
                )
            })
            .collect();
        let (_, _, em) = problem(&cs);
        let mut st = em.random_state(3, 5, false).unwrap();
        for _ in 0..5 {
            let post = em.step(&mut st).unwrap();
            for r in post.rows() {
                assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        assert!((st.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tied_state_stays_tied() {
        let cs: Vec<Cascade> = (0..20)
            .map(|i| {
                cascade(
                    &format!("c{i}"),
                    &[(i % 3, 0.0), (3 + i % 2, 1.0), (5, 2.0)],
                )
            })
            .collect();
        let (_, _, em) = problem(&cs);
        let mut st = em.random_state(2, 1, true).unwrap();
        for _ in 0..4 {
            em.step(&mut st).unwrap();
        }
        for m in 0..2 {
            assert!(st.probs(m).windows(2).all(|w| w[0] == w[1]));
        }
    }
}
