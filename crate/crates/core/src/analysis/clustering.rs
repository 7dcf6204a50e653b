use rand::seq::SliceRandom;
use serde::Serialize;

use crate::cascade::Label;
use crate::error::{Error, Result};
use crate::inference::PosteriorAssignment;
use crate::rng;

/// Hard cluster per cascade plus a flag for exact ties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub clusters: Vec<usize>,
    pub ties: Vec<bool>,
}

impl ClusterAssignment {
    pub fn tie_count(&self) -> usize {
        self.ties.iter().filter(|&&t| t).count()
    }
}

/// `argmax_M γ_s^M`; exact ties go to the lowest component index and are flagged.
pub fn assign_clusters(posterior: &PosteriorAssignment) -> ClusterAssignment {
    let clusters = posterior.hard_labels();
    let ties = posterior
        .rows()
        .zip(&clusters)
        .map(|(r, &c)| r.iter().enumerate().any(|(m, &g)| m != c && g == r[c]))
        .collect();
    ClusterAssignment { clusters, ties }
}

/// Cluster → label bijection for two clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterMapping {
    pub labels: [Label; 2],
    /// Holdout accuracy of the chosen bijection.
    pub holdout_correct: usize,
    pub holdout_size: usize,
    /// Both bijections scored the same on the holdout; identity was kept.
    pub tie: bool,
}

impl ClusterMapping {
    pub fn label_of(&self, cluster: usize) -> Label {
        self.labels[cluster]
    }

    pub fn apply(&self, clusters: &[usize]) -> Vec<Label> {
        clusters.iter().map(|&c| self.labels[c]).collect()
    }
}

/// Labels each cluster by majority vote of its holdout members. When the two
/// majorities agree (or a cluster has no clear majority) the bijection with the
/// higher holdout accuracy wins.
///
/// `holdout` pairs a cascade position in `clusters` with its known label.
pub fn map_clusters_to_labels(
    clusters: &[usize],
    holdout: &[(usize, Label)],
) -> Result<ClusterMapping> {
    if clusters.iter().any(|&c| c > 1) {
        return Err(Error::domain("label mapping supports two clusters"));
    }
    // counts[cluster][0 = true, 1 = fake]
    let mut counts = [[0usize; 2]; 2];
    for &(s, label) in holdout {
        let c = *clusters
            .get(s)
            .ok_or_else(|| Error::domain(format!("holdout cascade {s} out of range")))?;
        match label {
            Label::True => counts[c][0] += 1,
            Label::Fake => counts[c][1] += 1,
            Label::Unknown => return Err(Error::domain("holdout labels must be true or fake")),
        }
    }
    if counts[0][0] + counts[1][0] == 0 || counts[0][1] + counts[1][1] == 0 {
        return Err(Error::domain(
            "holdout must contain both true and fake cascades",
        ));
    }
    let majority = |c: [usize; 2]| match c[0].cmp(&c[1]) {
        std::cmp::Ordering::Greater => Some(Label::True),
        std::cmp::Ordering::Less => Some(Label::Fake),
        std::cmp::Ordering::Equal => None,
    };
    let identity = counts[0][0] + counts[1][1];
    let swapped = counts[0][1] + counts[1][0];
    let size = holdout.len();
    let mapping = |labels: [Label; 2], correct: usize, tie: bool| ClusterMapping {
        labels,
        holdout_correct: correct,
        holdout_size: size,
        tie,
    };
    Ok(match (majority(counts[0]), majority(counts[1])) {
        (Some(Label::True), Some(Label::Fake)) => {
            mapping([Label::True, Label::Fake], identity, false)
        }
        (Some(Label::Fake), Some(Label::True)) => {
            mapping([Label::Fake, Label::True], swapped, false)
        }
        _ if swapped > identity => mapping([Label::Fake, Label::True], swapped, false),
        _ => mapping([Label::True, Label::Fake], identity, swapped == identity),
    })
}

/// Indices of a stratified `fraction` of the labelled cascades (at least one per
/// present label), in ascending order.
pub fn stratified_holdout(
    labels: &[Option<Label>],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!(
            "holdout fraction {fraction} outside (0, 1]"
        )));
    }
    let mut picked = Vec::new();
    for (stream, target) in [Label::True, Label::Fake].into_iter().enumerate() {
        let mut group: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == Some(target))
            .collect();
        if group.is_empty() {
            continue;
        }
        group.shuffle(&mut rng::stream(seed, stream as u64));
        let take = ((group.len() as f64 * fraction).round() as usize).clamp(1, group.len());
        picked.extend_from_slice(&group[..take]);
    }
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClusterMetrics {
    pub accuracy: f64,
    /// Fake is the positive class.
    pub f1: f64,
    /// Mean of `|π̂^M − empirical frequency of M|` over the two labels.
    pub mae_pi: f64,
}

/// `pi_hat` is `(π̂^T, π̂^F)`. F1 is 1 when neither truth nor prediction has a fake.
pub fn clustering_metrics(
    predicted: &[Label],
    truth: &[Label],
    pi_hat: [f64; 2],
) -> Result<ClusterMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::domain("no labels to score"));
    }
    if truth.iter().chain(predicted).any(|&l| l == Label::Unknown) {
        return Err(Error::domain("metrics need true/fake labels"));
    }
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        correct += usize::from(p == t);
        match (p, t) {
            (Label::Fake, Label::Fake) => tp += 1,
            (Label::Fake, _) => fp += 1,
            (_, Label::Fake) => fneg += 1,
            _ => {}
        }
    }
    let n = truth.len() as f64;
    let f1 = if tp + fp + fneg == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    };
    let fake_freq = truth.iter().filter(|&&l| l == Label::Fake).count() as f64 / n;
    let mae_pi = ((pi_hat[0] - (1.0 - fake_freq)).abs() + (pi_hat[1] - fake_freq).abs()) / 2.0;
    Ok(ClusterMetrics {
        accuracy: correct as f64 / n,
        f1,
        mae_pi,
    })
}
