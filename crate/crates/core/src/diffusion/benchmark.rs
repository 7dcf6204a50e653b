use rand::seq::index;
use rand::Rng;

use super::{sample_mixture_cascades, ComponentParams, MixtureParams, SeedDistribution};
use crate::cascade::Cascade;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, GraphBuilder, Interner, NodeId};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub n_nodes: usize,
    pub n_edges: usize,
    /// `(π_true, π_fake)` per mixture.
    pub mixtures: Vec<[f64; 2]>,
    pub sample_sizes: Vec<usize>,
    pub seed_exponent: f64,
    pub rng_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_nodes: 512,
            n_edges: 1024,
            mixtures: vec![[0.5, 0.5], [0.2, 0.8], [0.35, 0.65]],
            sample_sizes: vec![100, 500, 1000, 2000, 5000],
            seed_exponent: 2.5,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSet {
    pub weights: [f64; 2],
    pub size: usize,
    pub cascades: Vec<Cascade>,
}

/// A random graph, two uniformly drawn IC components over it, and labelled
/// cascade sets for every `(mixture, sample size)` pair.
#[derive(Clone, Debug)]
pub struct BenchmarkBundle {
    pub graph: DirectedGraph,
    pub components: [ComponentParams; 2],
    pub sets: Vec<BenchmarkSet>,
}

impl BenchmarkBundle {
    /// Ground-truth mixture for one of the bundle's weight pairs.
    pub fn truth(&self, weights: [f64; 2]) -> MixtureParams {
        MixtureParams::new(weights.to_vec(), self.components.to_vec())
            .expect("generated parameters are valid")
    }
}

/// Uniform simple digraph: `n_edges` distinct ordered pairs without self-loops.
/// Nodes are named `"0"` to `"n-1"`.
pub fn random_graph<R: Rng + ?Sized>(
    n_nodes: usize,
    n_edges: usize,
    rng: &mut R,
) -> Result<DirectedGraph> {
    let pairs = n_nodes.saturating_mul(n_nodes.saturating_sub(1));
    if n_edges > pairs {
        return Err(Error::domain(format!(
            "{n_edges} edges do not fit in a simple digraph on {n_nodes} nodes"
        )));
    }
    let names = Interner::from_names((0..n_nodes).map(|i| i.to_string()));
    let mut b = GraphBuilder::with_interner(names);
    for k in index::sample(rng, pairs, n_edges) {
        let u = k / (n_nodes - 1);
        let r = k % (n_nodes - 1);
        let v = if r >= u { r + 1 } else { r };
        b.add_edge(NodeId(u as u32), NodeId(v as u32), None)?;
    }
    Ok(b.build())
}

fn uniform_params<R: Rng + ?Sized>(graph: &DirectedGraph, rng: &mut R) -> ComponentParams {
    ComponentParams::from_edges(graph.edges().iter().map(|&e| (e, rng.random::<f64>())))
        .expect("uniform draws lie in [0, 1]")
}

/// Deterministic in `cfg.rng_seed`: the graph, each component and each cascade
/// set draw from separate streams.
pub fn generate_synthetic_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkBundle> {
    if cfg
        .mixtures
        .iter()
        .flatten()
        .any(|w| !(0.0..=1.0).contains(w))
        || cfg
            .mixtures
            .iter()
            .any(|[a, b]| ((a + b) - 1.0).abs() > super::WEIGHT_SUM_TOL)
    {
        return Err(Error::domain(
            "each mixture must be a distribution over two components",
        ));
    }
    let graph = random_graph(cfg.n_nodes, cfg.n_edges, &mut rng::stream(cfg.rng_seed, 0))?;
    let components = [
        uniform_params(&graph, &mut rng::stream(cfg.rng_seed, 1)),
        uniform_params(&graph, &mut rng::stream(cfg.rng_seed, 2)),
    ];
    let seeds = SeedDistribution::PowerLawSize {
        exponent: cfg.seed_exponent,
        max_size: cfg.n_nodes,
    };
    let mut sets = Vec::new();
    for (mi, &weights) in cfg.mixtures.iter().enumerate() {
        let mix = MixtureParams::new(weights.to_vec(), components.to_vec())?;
        for (si, &size) in cfg.sample_sizes.iter().enumerate() {
            let set_seed = rng::child_seed(cfg.rng_seed, (mi * 1000 + si) as u64);
            let cascades = sample_mixture_cascades(&graph, &mix, &seeds, size, set_seed)?;
            sets.push(BenchmarkSet {
                weights,
                size,
                cascades,
            });
        }
    }
    Ok(BenchmarkBundle {
        graph,
        components,
        sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::dump_cascades;

    #[test]
    fn default_graph_shape() {
        let cfg = BenchmarkConfig {
            sample_sizes: vec![],
            ..Default::default()
        };
        let b = generate_synthetic_benchmark(&cfg).unwrap();
        assert_eq!(b.graph.node_count(), 512);
        assert_eq!(b.graph.edge_count(), 1024);
        assert!(b.graph.edges().iter().all(|(u, v)| u != v));
        assert!(b.components.iter().all(|c| c.len() == 1024));
    }

    #[test]
    fn sample_sizes_per_mixture() {
        let cfg = BenchmarkConfig {
            n_nodes: 64,
            n_edges: 128,
            sample_sizes: vec![100],
            ..Default::default()
        };
        let b = generate_synthetic_benchmark(&cfg).unwrap();
        assert_eq!(b.sets.len(), 3);
        assert!(b.sets.iter().all(|s| s.cascades.len() == 100));
    }

    #[test]
    fn bit_identical_for_equal_seeds() {
        let cfg = BenchmarkConfig {
            n_nodes: 64,
            n_edges: 128,
            sample_sizes: vec![50],
            rng_seed: 99,
            ..Default::default()
        };
        let a = generate_synthetic_benchmark(&cfg).unwrap();
        let b = generate_synthetic_benchmark(&cfg).unwrap();
        assert_eq!(a.graph.to_edge_list(), b.graph.to_edge_list());
        assert_eq!(a.components, b.components);
        for (x, y) in a.sets.iter().zip(&b.sets) {
            assert_eq!(
                dump_cascades(&x.cascades, a.graph.names()),
                dump_cascades(&y.cascades, b.graph.names())
            );
        }
    }

    #[test]
    fn infeasible_edge_count() {
        let cfg = BenchmarkConfig {
            n_nodes: 4,
            n_edges: 13,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic_benchmark(&cfg),
            Err(Error::Domain(_))
        ));
        // complete digraph is feasible
        assert_eq!(
            random_graph(4, 12, &mut rng::stream(0, 0))
                .unwrap()
                .edge_count(),
            12
        );
    }
}
