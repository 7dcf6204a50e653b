use serde::Serialize;

use crate::analysis::{
    assign_clusters, clustering_metrics, map_clusters_to_labels, stratified_holdout,
};
use crate::cascade::{Cascade, Label};
use crate::diffusion::MixtureParams;
use crate::error::{Error, Result};
use crate::index::{ActivationIndex, Window};
use crate::inference::{fit, FitConfig};

/// Parameter error of a fit against the generating mixture.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryError {
    /// Mean `|p̂ − p|` over every true edge of every component; edges the fit
    /// never saw count as `p̂ = 0`.
    pub edge_mae: f64,
    /// Mean `|π̂ − π|` over components.
    pub pi_mae: f64,
    /// Fitted component matched to each true component.
    pub order: Vec<usize>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..k {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

/// Errors under the component matching with the lowest edge MAE
/// (first permutation in enumeration order on ties).
pub fn recovery_error(truth: &MixtureParams, fitted: &MixtureParams) -> Result<RecoveryError> {
    let k = truth.k();
    if fitted.k() != k {
        return Err(Error::domain(format!(
            "fit has {} components, truth {k}",
            fitted.k()
        )));
    }
    if k > 6 {
        return Err(Error::domain("component matching is limited to k ≤ 6"));
    }
    let edges = truth.component(0).len();
    if edges == 0 {
        return Err(Error::domain("ground truth has no edges"));
    }
    let mut best: Option<RecoveryError> = None;
    for order in permutations(k) {
        let mut abs = 0.0;
        for (m, &f) in order.iter().enumerate() {
            let fit = fitted.component(f);
            for ((u, v), p) in truth.component(m).iter() {
                abs += (fit.get(u, v).unwrap_or(0.0) - p).abs();
            }
        }
        let edge_mae = abs / (k * edges) as f64;
        if best.as_ref().map_or(true, |b| edge_mae < b.edge_mae) {
            let pi_mae = order
                .iter()
                .enumerate()
                .map(|(m, &f)| (fitted.weights()[f] - truth.weights()[m]).abs())
                .sum::<f64>()
                / k as f64;
            best = Some(RecoveryError {
                edge_mae,
                pi_mae,
                order,
            });
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Recoverability and separability of one labelled synthetic cascade set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SetEvaluation {
    pub pi_true: f64,
    pub size: usize,
    pub edge_mae: f64,
    pub pi_mae: f64,
    /// Scored on the cascades outside the mapping holdout.
    pub accuracy: f64,
    pub f1: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fits `cascades`, scores the parameters against `truth`, maps clusters to
/// labels on a stratified holdout and scores the remaining cascades.
pub fn evaluate_labelled_set(
    cascades: &[Cascade],
    truth: &MixtureParams,
    window: Window,
    cfg: &FitConfig,
    holdout_fraction: f64,
    holdout_seed: u64,
) -> Result<SetEvaluation> {
    if cfg.k != 2 || truth.k() != 2 {
        return Err(Error::domain("set evaluation needs two components"));
    }
    let labels: Vec<Option<Label>> = cascades.iter().map(Cascade::label).collect();
    if labels
        .iter()
        .any(|l| !matches!(l, Some(Label::True | Label::Fake)))
    {
        return Err(Error::domain("every cascade needs a true/fake label"));
    }
    let index = ActivationIndex::build(cascades, window)?;
    let res = fit(&index, cfg)?;
    let rec = recovery_error(truth, &res.params)?;

    let clusters = assign_clusters(&res.posterior).clusters;
    let holdout = stratified_holdout(&labels, holdout_fraction, holdout_seed)?;
    let pairs: Vec<(usize, Label)> = holdout.iter().map(|&s| (s, labels[s].unwrap())).collect();
    let mapping = map_clusters_to_labels(&clusters, &pairs)?;
    let mut in_holdout = vec![false; cascades.len()];
    holdout.iter().for_each(|&s| in_holdout[s] = true);
    let (pred, gold): (Vec<Label>, Vec<Label>) = (0..cascades.len())
        .filter(|&s| !in_holdout[s])
        .map(|s| (mapping.label_of(clusters[s]), labels[s].unwrap()))
        .unzip();
    if gold.is_empty() {
        return Err(Error::domain("holdout left no cascades to score"));
    }
    let true_cluster = mapping
        .labels
        .iter()
        .position(|&l| l == Label::True)
        .unwrap();
    let w = res.params.weights();
    let metrics = clustering_metrics(&pred, &gold, [w[true_cluster], w[1 - true_cluster]])?;
    Ok(SetEvaluation {
        pi_true: truth.weights()[0],
        size: cascades.len(),
        edge_mae: rec.edge_mae,
        pi_mae: rec.pi_mae,
        accuracy: metrics.accuracy,
        f1: metrics.f1,
        converged: res.converged(),
        iterations: res.state.iteration(),
    })
}
