//! EM estimation of mixture-of-IC parameters from unlabeled cascades.
//!
//! Each fit compiles its cascades into an [`Em`] problem once. Failure terms
//! are evaluated as "all outgoing edges of active users" minus the pairs that
//! are not failures, so an iteration costs time linear in the activations and
//! windowed co-activations. It does not depend on node out-degree.

mod em;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use em::{Em, EmState, PosteriorAssignment};

use crate::diffusion::MixtureParams;
use crate::error::{Error, Result};
use crate::index::{ActivationIndex, CandidateEdgeIndex, FailureRule};
use crate::rng;

/// Clamp applied to every edge probability.
pub const EPS_P: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub k: usize,
    pub init_seed: u64,
    pub max_iters: usize,
    /// Stop when the per-cascade NLL changes by less than this.
    pub tol: f64,
    pub restarts: usize,
    pub failure_rule: FailureRule,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k: 2,
            init_seed: 0,
            max_iters: 200,
            tol: 0.01,
            restarts: 5,
            failure_rule: FailureRule::OutsideWindow,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::domain("at least one restart is required"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::domain(format!(
                "tolerance {} must be finite and non-negative",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: MixtureParams,
    pub posterior: PosteriorAssignment,
    pub state: EmState,
    /// Which restart produced the result.
    pub restart: usize,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.state.converged()
    }

    pub fn nll(&self) -> f64 {
        self.state.nll().expect("at least one E-step")
    }
}

/// Runs EM from `state` until the NLL change drops below `tol` or `max_iters`
/// M-steps have been taken. The returned posterior matches the final parameters.
pub fn run_em(
    em: &Em,
    mut state: EmState,
    max_iters: usize,
    tol: f64,
) -> Result<(EmState, PosteriorAssignment)> {
    let mut m_steps = 0;
    loop {
        let post = em.e_step(&mut state);
        let trace = state.nll_trace();
        if let [.., prev, last] = trace {
            if (prev - last).abs() < tol {
                state.set_converged(true);
                return Ok((state, post));
            }
        }
        if m_steps == max_iters {
            log::warn!("EM stopped after {max_iters} iterations without converging");
            return Ok((state, post));
        }
        em.m_step(&mut state, &post)?;
        m_steps += 1;
    }
}

fn fit_impl(
    index: &ActivationIndex,
    cfg: &FitConfig,
    tied: bool,
    init: Option<&MixtureParams>,
) -> Result<FitResult> {
    cfg.validate()?;
    let cands = CandidateEdgeIndex::derive(index, cfg.failure_rule);
    let em = Em::new(index, &cands)?;
    if cands.is_empty() {
        log::warn!("no candidate edges; the fit is trivial");
    }
    let runs: Vec<(EmState, PosteriorAssignment)> = match init {
        Some(p) => {
            if p.k() != cfg.k {
                return Err(Error::domain(format!(
                    "initial parameters have {} components, expected {}",
                    p.k(),
                    cfg.k
                )));
            }
            vec![run_em(
                &em,
                em.state_from(p, tied)?,
                cfg.max_iters,
                cfg.tol,
            )?]
        }
        None => (0..cfg.restarts)
            .into_par_iter()
            .map(|r| {
                let state =
                    em.random_state(cfg.k, rng::child_seed(cfg.init_seed, r as u64), tied)?;
                run_em(&em, state, cfg.max_iters, cfg.tol)
            })
            .collect::<Result<_>>()?,
    };
    let (restart, (state, posterior)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.0.nll().unwrap().total_cmp(&b.0.nll().unwrap()))
        .expect("at least one run");
    Ok(FitResult {
        params: em.mixture(&state),
        posterior,
        state,
        restart,
    })
}

/// Mixture EM with `cfg.restarts` random starts; keeps the lowest final NLL.
pub fn fit(index: &ActivationIndex, cfg: &FitConfig) -> Result<FitResult> {
    fit_impl(index, cfg, false, None)
}

/// A single EM run from explicit parameters over the candidate edges.
pub fn fit_from(
    index: &ActivationIndex,
    cfg: &FitConfig,
    init: &MixtureParams,
) -> Result<FitResult> {
    fit_impl(index, cfg, false, Some(init))
}

/// Homogeneous variant: one probability per component shared by all edges.
pub fn fit_hic(index: &ActivationIndex, cfg: &FitConfig) -> Result<FitResult> {
    fit_impl(index, cfg, true, None)
}

/// Mean of `−ln Σ_M π^M exp(ℓ_s^M)` over the indexed cascades. Parents outside
/// the model's edges count as `EPS_P`.
pub fn heldout_nll(
    index: &ActivationIndex,
    params: &MixtureParams,
    rule: FailureRule,
) -> Result<f64> {
    Ok(posterior_under(index, params, rule)?.1)
}

/// Responsibilities and mean NLL of the indexed cascades under fixed parameters.
pub fn posterior_under(
    index: &ActivationIndex,
    params: &MixtureParams,
    rule: FailureRule,
) -> Result<(PosteriorAssignment, f64)> {
    if index.is_empty() {
        return Err(Error::domain("no cascades to score"));
    }
    let cands = CandidateEdgeIndex::with_edges(index, rule, params.edges().collect());
    let em = Em::new(index, &cands)?;
    let mut state = em.state_from(params, false)?;
    let post = em.e_step(&mut state);
    Ok((post, state.nll().expect("one E-step")))
}
