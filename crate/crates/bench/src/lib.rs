//! Shared fixtures for the criterion benchmarks.

use cascademix::diffusion::{generate_synthetic_benchmark, BenchmarkBundle, BenchmarkConfig};

/// One mixture at π = 0.5 with a single cascade set of `cascades` cascades.
pub fn bundle(nodes: usize, edges: usize, cascades: usize) -> BenchmarkBundle {
    generate_synthetic_benchmark(&BenchmarkConfig {
        n_nodes: nodes,
        n_edges: edges,
        mixtures: vec![[0.5, 0.5]],
        sample_sizes: vec![cascades],
        seed_exponent: 2.5,
        rng_seed: 11,
    })
    .expect("benchmark parameters are valid")
}
