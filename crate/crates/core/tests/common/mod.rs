//! Straight-line reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use cascademix::cascade::{Cascade, Event};
use cascademix::diffusion::ComponentParams;
use cascademix::graph::{DirectedGraph, GraphBuilder, NodeId};
use cascademix::index::{FailureRule, Window};
use rand::Rng;

pub const EPS_P: f64 = 1e-6;

/// Graph whose node `i` has id `i`.
pub fn graph(n: usize, edges: &[(u32, u32)]) -> DirectedGraph {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(&i.to_string());
    }
    for &(u, v) in edges {
        b.add_edge(NodeId(u), NodeId(v), None).unwrap();
    }
    b.build()
}

pub fn params(edges: &[(u32, u32)], probs: &[f64]) -> ComponentParams {
    ComponentParams::from_edges(
        edges
            .iter()
            .zip(probs)
            .map(|(&(u, v), &p)| ((NodeId(u), NodeId(v)), p)),
    )
    .unwrap()
}

pub fn random_edges<R: Rng>(n: u32, max_edges: usize, rng: &mut R) -> Vec<(u32, u32)> {
    let mut all: Vec<(u32, u32)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let m = rng.random_range(0..=max_edges.min(all.len()));
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push(all.swap_remove(rng.random_range(0..all.len())));
    }
    out.sort();
    out
}

// ---------------------------------------------------------------- influence

fn reach_count(n: usize, edges: &[(u32, u32)], live_mask: u64, seeds: &[u32]) -> usize {
    let mut seen = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    for &s in seeds {
        if !seen[s as usize] {
            seen[s as usize] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a == u && live_mask >> e & 1 == 1 && !seen[b as usize] {
                seen[b as usize] = true;
                stack.push(b);
            }
        }
    }
    seen.iter().filter(|&&x| x).count()
}

/// Expected spread by summing over every live-edge subgraph.
pub fn exact_spread(n: usize, edges: &[(u32, u32)], probs: &[f64], seeds: &[u32]) -> f64 {
    assert!(edges.len() <= 20);
    let mut total = 0.0;
    for mask in 0u64..1 << edges.len() {
        let mut w = 1.0;
        for (e, &p) in probs.iter().enumerate() {
            w *= if mask >> e & 1 == 1 { p } else { 1.0 - p };
        }
        if w > 0.0 {
            total += w * reach_count(n, edges, mask, seeds) as f64;
        }
    }
    total
}

/// Plain greedy over exact spread; ties go to the smaller node.
pub fn naive_greedy(n: usize, edges: &[(u32, u32)], probs: &[f64], k: usize) -> Vec<u32> {
    let mut chosen: Vec<u32> = Vec::new();
    for _ in 0..k.min(n) {
        let base = exact_spread(n, edges, probs, &chosen);
        let mut best: Option<(f64, u32)> = None;
        for v in (0..n as u32).filter(|v| !chosen.contains(v)) {
            let mut s = chosen.clone();
            s.push(v);
            let gain = exact_spread(n, edges, probs, &s) - base;
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, v));
            }
        }
        chosen.push(best.unwrap().1);
    }
    chosen
}

// ---------------------------------------------------------------- likelihood

pub type RawCascade = Vec<(u32, f64)>;

/// Mixing weights and per-component edge probabilities.
pub type Mixture = (Vec<f64>, Vec<BTreeMap<(u32, u32), f64>>);

pub fn to_cascades(raw: &[RawCascade]) -> Vec<Cascade> {
    raw.iter()
        .enumerate()
        .map(|(i, c)| {
            let ev = c
                .iter()
                .map(|&(u, t)| Event {
                    user: NodeId(u),
                    time: t,
                })
                .collect();
            Cascade::new(format!("c{i}"), None, ev).unwrap()
        })
        .collect()
}

/// Random cascades with distinct users and integer times (ties allowed).
pub fn random_raw_cascades<R: Rng>(
    n_users: u32,
    count: usize,
    max_len: usize,
    rng: &mut R,
) -> Vec<RawCascade> {
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_len.min(n_users as usize));
            let mut users: Vec<u32> = (0..n_users).collect();
            let mut t = 0.0;
            (0..len)
                .map(|_| {
                    let u = users.swap_remove(rng.random_range(0..users.len()));
                    t += rng.random_range(0..3) as f64;
                    (u, t)
                })
                .collect()
        })
        .collect()
}

fn sorted(c: &RawCascade) -> RawCascade {
    let mut c = c.clone();
    c.sort_by(|a, b| a.1.total_cmp(&b.1));
    c
}

/// Users activated strictly before position `j` that fall inside the window.
pub fn parents(c: &RawCascade, j: usize, window: Window) -> Vec<u32> {
    let tj = c[j].1;
    let earlier: Vec<(u32, f64)> = c.iter().copied().filter(|&(_, t)| t < tj).collect();
    match window {
        Window::Events(w) => earlier[earlier.len().saturating_sub(w)..]
            .iter()
            .map(|e| e.0)
            .collect(),
        Window::Time(w) => earlier
            .iter()
            .filter(|e| e.1 >= tj - w)
            .map(|e| e.0)
            .collect(),
    }
}

/// Every ordered pair (parent, child) that co-occurs within the window.
pub fn candidate_edges(raw: &[RawCascade], window: Window) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for c in raw.iter().map(sorted) {
        for j in 0..c.len() {
            for u in parents(&c, j, window) {
                out.insert((u, c[j].0));
            }
        }
    }
    out
}

/// `(success, failure)` for edge `(u, v)` in one cascade.
pub fn edge_role(
    c: &RawCascade,
    u: u32,
    v: u32,
    window: Window,
    rule: FailureRule,
) -> (bool, bool) {
    let c = sorted(c);
    let Some(iu) = c.iter().position(|e| e.0 == u) else {
        return (false, false);
    };
    match c.iter().position(|e| e.0 == v) {
        None => (false, true),
        Some(iv) => {
            let is_parent = parents(&c, iv, window).contains(&u);
            let later = c[iv].1 > c[iu].1;
            let fail = rule == FailureRule::OutsideWindow && later && !is_parent;
            (is_parent, fail)
        }
    }
}

/// `ln P(s | θ)`: activation terms for non-seeds with parents, failure terms
/// for model edges whose source is active and whose child did not follow.
pub fn log_likelihood(
    c: &RawCascade,
    probs: &BTreeMap<(u32, u32), f64>,
    window: Window,
    rule: FailureRule,
) -> f64 {
    let c = sorted(c);
    let p = |u: u32, v: u32| probs.get(&(u, v)).copied().unwrap_or(EPS_P);
    let mut ll = 0.0;
    for j in 0..c.len() {
        let v = c[j].0;
        let pa = parents(&c, j, window);
        if c[j].1 > c[0].1 && !pa.is_empty() {
            let fail: f64 = pa.iter().map(|&u| 1.0 - p(u, v)).product();
            ll += (1.0 - fail).ln();
        }
    }
    for (&(u, v), &puv) in probs {
        if edge_role(&c, u, v, window, rule).1 {
            ll += (1.0 - puv).ln();
        }
    }
    ll
}

pub fn mixture_nll(
    raw: &[RawCascade],
    pi: &[f64],
    comps: &[BTreeMap<(u32, u32), f64>],
    window: Window,
    rule: FailureRule,
) -> f64 {
    let mut total = 0.0;
    for c in raw {
        let lik: f64 = pi
            .iter()
            .zip(comps)
            .map(|(w, th)| w * log_likelihood(c, th, window, rule).exp())
            .sum();
        total -= lik.ln();
    }
    total / raw.len() as f64
}

pub fn responsibilities(
    c: &RawCascade,
    pi: &[f64],
    comps: &[BTreeMap<(u32, u32), f64>],
    window: Window,
    rule: FailureRule,
) -> Vec<f64> {
    let w: Vec<f64> = pi
        .iter()
        .zip(comps)
        .map(|(p, th)| p * log_likelihood(c, th, window, rule).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// One M-step from responsibilities `gamma[s][m]`.
pub fn m_step(
    raw: &[RawCascade],
    gamma: &[Vec<f64>],
    comps: &[BTreeMap<(u32, u32), f64>],
    window: Window,
    rule: FailureRule,
) -> Mixture {
    let k = comps.len();
    let pi: Vec<f64> = (0..k)
        .map(|m| gamma.iter().map(|g| g[m]).sum::<f64>() / raw.len() as f64)
        .collect();
    let mut out = Vec::with_capacity(k);
    for m in 0..k {
        let th = &comps[m];
        let mut next = BTreeMap::new();
        for (&(u, v), &puv) in th {
            let (mut num, mut den) = (0.0, 0.0);
            for (s, c) in raw.iter().enumerate() {
                let (succ, fail) = edge_role(c, u, v, window, rule);
                if succ {
                    let c = sorted(c);
                    let j = c.iter().position(|e| e.0 == v).unwrap();
                    let ps = 1.0
                        - parents(&c, j, window)
                            .iter()
                            .map(|&x| 1.0 - th.get(&(x, v)).copied().unwrap_or(EPS_P))
                            .product::<f64>();
                    num += gamma[s][m] * puv / ps;
                    den += gamma[s][m];
                }
                if fail {
                    den += gamma[s][m];
                }
            }
            let p = if den > 0.0 {
                (num / den).clamp(EPS_P, 1.0 - EPS_P)
            } else {
                puv
            };
            next.insert((u, v), p);
        }
        out.push(next);
    }
    (pi, out)
}

// ---------------------------------------------------------------- statistics

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (
        m,
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0),
    )
}

fn t_pdf(x: f64, nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let c =
        ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    (c - (nu + 1.0) / 2.0 * (x * x / nu).ln_1p()).exp()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `(t, df, P(T > t))` with the tail integrated numerically.
pub fn welch(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let n = ((t.abs() * 4000.0) as usize).max(4000);
    let p = 0.5 - simpson(|x| t_pdf(x, df), 0.0, t, n);
    (t, df, p)
}

/// `U` of `a` by pair counting.
pub fn mwu_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            u += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    u
}

fn combinations(
    n: usize,
    k: usize,
    start: usize,
    cur: &mut Vec<usize>,
    out: &mut dyn FnMut(&[usize]),
) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// `P(U ≥ u_obs)` over all relabellings of the pooled values.
pub fn mwu_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let u_obs = mwu_u(a, b);
    let (mut hit, mut total) = (0u64, 0u64);
    combinations(pooled.len(), a.len(), 0, &mut Vec::new(), &mut |idx| {
        let x: Vec<f64> = idx.iter().map(|&i| pooled[i]).collect();
        let y: Vec<f64> = (0..pooled.len())
            .filter(|i| !idx.contains(i))
            .map(|i| pooled[i])
            .collect();
        total += 1;
        if mwu_u(&x, &y) >= u_obs - 1e-9 {
            hit += 1;
        }
    });
    hit as f64 / total as f64
}

/// `(U, z, p)` of the tie-corrected normal approximation with continuity 0.5.
pub fn mwu_normal(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for x in a.iter().chain(b) {
        *counts.entry(x.to_bits()).or_default() += 1;
    }
    let ties: f64 = counts.values().map(|&t| (t * t * t - t) as f64).sum();
    let sd = (n1 * n2 / 12.0 * (n + 1.0 - ties / (n * (n - 1.0)))).sqrt();
    let u = mwu_u(a, b);
    let z = (u - n1 * n2 / 2.0 - 0.5) / sd;
    (
        u,
        z,
        0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2),
    )
}
