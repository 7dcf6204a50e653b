use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Pareto};
use rayon::prelude::*;

use super::{IcModel, MixtureParams};
use crate::cascade::{Cascade, Event, Label};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId};
use crate::rng::{self, StreamRng};

/// Distribution of initial adopter sets.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedDistribution {
    /// A single node drawn uniformly.
    UniformNode,
    /// Size `floor(X)` with `X` Pareto on `[1, ∞)` with density `∝ x^-exponent`,
    /// truncated to `[1, min(max_size, |V|)]`; members drawn uniformly without
    /// replacement.
    PowerLawSize { exponent: f64, max_size: usize },
    /// One of the listed seed sets, drawn uniformly.
    Explicit(Vec<Vec<NodeId>>),
}

impl Default for SeedDistribution {
    fn default() -> Self {
        SeedDistribution::PowerLawSize {
            exponent: 2.5,
            max_size: usize::MAX,
        }
    }
}

impl SeedDistribution {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if n_nodes == 0 {
            return Err(Error::domain("cannot draw seeds from an empty graph"));
        }
        match self {
            SeedDistribution::UniformNode => Ok(()),
            SeedDistribution::PowerLawSize { exponent, max_size } => {
                if !(exponent.is_finite() && *exponent > 1.0) {
                    return Err(Error::domain(format!(
                        "power-law exponent {exponent} must exceed 1"
                    )));
                }
                if *max_size == 0 {
                    return Err(Error::domain("maximum seed-set size must be positive"));
                }
                Ok(())
            }
            SeedDistribution::Explicit(sets) => {
                if sets.is_empty() || sets.iter().any(Vec::is_empty) {
                    return Err(Error::domain("explicit seed sets must be non-empty"));
                }
                if sets.iter().flatten().any(|s| s.index() >= n_nodes) {
                    return Err(Error::domain(
                        "explicit seed set references an unknown node",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n_nodes: usize, rng: &mut R) -> Vec<NodeId> {
        match self {
            SeedDistribution::UniformNode => vec![NodeId(rng.random_range(0..n_nodes) as u32)],
            SeedDistribution::PowerLawSize { exponent, max_size } => {
                let pareto = Pareto::new(1.0, exponent - 1.0).expect("validated exponent");
                let x: f64 = pareto.sample(rng);
                let cap = (*max_size).min(n_nodes);
                let size = if x >= cap as f64 {
                    cap
                } else {
                    (x.floor() as usize).clamp(1, cap)
                };
                index::sample(rng, n_nodes, size)
                    .into_iter()
                    .map(|i| NodeId(i as u32))
                    .collect()
            }
            SeedDistribution::Explicit(sets) => sets[rng.random_range(0..sets.len())].clone(),
        }
    }
}

fn draw_component(weights: &[f64], rng: &mut StreamRng) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (m, &w) in weights.iter().enumerate() {
        acc += w;
        if x < acc {
            return m;
        }
    }
    // x landed in the rounding slack above the cumulative sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Draws `n` labelled cascades from the mixture. Cascade `i` uses stream `i`:
/// seed set first, then the component, then the IC run.
pub fn sample_mixture_cascades(
    graph: &DirectedGraph,
    mix: &MixtureParams,
    seeds: &SeedDistribution,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<Cascade>> {
    if n == 0 {
        return Err(Error::domain("at least one cascade must be sampled"));
    }
    seeds.validate(graph.node_count())?;
    let models = mix
        .components()
        .iter()
        .map(|c| IcModel::new(graph, c))
        .collect::<Result<Vec<_>>>()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(rng_seed, i as u64);
            let seed_set = seeds.sample(graph.node_count(), &mut rng);
            let m = draw_component(mix.weights(), &mut rng);
            let events = models[m]
                .run(&seed_set, &mut rng)
                .into_iter()
                .map(|(user, step)| Event {
                    user,
                    time: step as f64,
                })
                .collect();
            Cascade::new(format!("c{i}"), Some(Label::of_component(m)), events)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ComponentParams;
    use crate::graph::GraphBuilder;

    fn star() -> DirectedGraph {
        let mut b = GraphBuilder::new();
        for leaf in ["b", "c", "d"] {
            b.add_named_edge("a", leaf, None).unwrap();
        }
        b.build()
    }

    fn mix(g: &DirectedGraph, pi: f64) -> MixtureParams {
        MixtureParams::two(
            pi,
            ComponentParams::uniform(g, 0.9).unwrap(),
            ComponentParams::uniform(g, 0.1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pure_true_mixture() {
        let g = star();
        let cs = sample_mixture_cascades(&g, &mix(&g, 1.0), &SeedDistribution::UniformNode, 200, 4)
            .unwrap();
        assert!(cs.iter().all(|c| c.label() == Some(Label::True)));
    }

    #[test]
    fn balanced_label_frequency() {
        let g = star();
        let n = 10_000;
        let cs = sample_mixture_cascades(&g, &mix(&g, 0.5), &SeedDistribution::UniformNode, n, 8)
            .unwrap();
        let frac = cs.iter().filter(|c| c.label() == Some(Label::True)).count() as f64 / n as f64;
        assert!(
            (frac - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(),
            "{frac}"
        );
    }

    #[test]
    fn single_cascade() {
        let g = star();
        let cs = sample_mixture_cascades(&g, &mix(&g, 0.5), &SeedDistribution::UniformNode, 1, 0)
            .unwrap();
        assert_eq!(cs.len(), 1);
        assert!(matches!(cs[0].label(), Some(Label::True | Label::Fake)));
        assert!(
            sample_mixture_cascades(&g, &mix(&g, 0.5), &SeedDistribution::UniformNode, 0, 0)
                .is_err()
        );
    }

    #[test]
    fn power_law_sizes_in_range() {
        let d = SeedDistribution::PowerLawSize {
            exponent: 2.5,
            max_size: 3,
        };
        d.validate(4).unwrap();
        let mut rng = rng::stream(1, 0);
        let mut ones = 0;
        for _ in 0..2000 {
            let s = d.sample(4, &mut rng);
            assert!((1..=3).contains(&s.len()));
            let mut sorted = s.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), s.len());
            ones += (s.len() == 1) as usize;
        }
        // P(size = 1) = 1 - 2^-1.5 ≈ 0.646
        assert!((ones as f64 / 2000.0 - 0.646).abs() < 0.05);
        assert!(SeedDistribution::PowerLawSize {
            exponent: 1.0,
            max_size: 3
        }
        .validate(4)
        .is_err());
    }

    #[test]
    fn explicit_sets() {
        let d = SeedDistribution::Explicit(vec![vec![NodeId(2)], vec![NodeId(0), NodeId(1)]]);
        d.validate(3).unwrap();
        assert!(d.validate(2).is_err());
        assert!(SeedDistribution::Explicit(vec![]).validate(3).is_err());
        let mut rng = rng::stream(1, 0);
        for _ in 0..10 {
            let s = d.sample(3, &mut rng);
            assert!(s == vec![NodeId(2)] || s == vec![NodeId(0), NodeId(1)]);
        }
    }
}
