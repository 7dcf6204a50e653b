//! Mixture-of-Independent-Cascades (MIC) modelling of information diffusion.
//!
//! Observed cascades are explained by a mixture of IC components ("true" and
//! "fake" news by convention). The crate fits the mixture by EM, clusters
//! cascades by posterior, tests diffusion hypotheses between the clusters and
//! evaluates node- and edge-level interventions on the fitted fake component.

pub mod analysis;
pub mod cascade;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod index;
pub mod inference;
pub mod influence;
pub mod intervention;
pub mod model_file;
pub mod rng;

pub use cascade::{Cascade, Event, Label};
pub use diffusion::{ComponentParams, IcModel, MixtureParams};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, Interner, NodeId};
pub use index::{CandidateEdgeIndex, FailureRule, Window};
pub use inference::{fit, FitConfig, FitResult};
