//! Ranking metrics and compatibility diagnostics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::compatibility::paris_indicator;
use crate::error::{Error, Result};
use crate::kg::{AlignmentState, EntityId, KnowledgeGraph};
use crate::normalizer::BeliefTable;
use crate::par;
use crate::similarity::{SimilarityRow, SimilaritySource};
use crate::stats::RelationStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hit1: f64,
    pub mrr: f64,
    pub mr: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Evaluation("no links to evaluate".into()));
        }
        let n = ranks.len() as f64;
        Ok(Self {
            hit1: ranks.iter().filter(|&&r| r == 1).count() as f64 / n,
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            mr: ranks.iter().map(|&r| r as f64).sum::<f64>() / n,
            n: ranks.len(),
        })
    }
}

/// Rank of `truth` in a row: one plus the number of targets scoring higher,
/// or equal with a lower id. A sparse row that lacks the truth ranks it just
/// past its last entry.
pub fn rank_in_row(row: &SimilarityRow, truth: EntityId) -> usize {
    let entries = row.entries();
    let Some(s) = row.get(truth) else {
        return entries.len() + 1;
    };
    1 + entries
        .iter()
        .filter(|&&(t, x)| x > s || (x == s && t < truth))
        .count()
}

/// Rank of the true target of every link over the full target ranking.
pub fn truth_ranks<S: SimilaritySource + ?Sized>(
    sims: &S,
    links: &[(EntityId, EntityId)],
) -> Result<Vec<usize>> {
    if let Some(&(s, _)) = links.iter().find(|l| l.0 >= sims.num_source()) {
        return Err(Error::Evaluation(format!(
            "source entity {s} has no similarity row"
        )));
    }
    if let Some(&(_, t)) = links.iter().find(|l| l.1 >= sims.num_target()) {
        return Err(Error::Evaluation(format!(
            "target entity {t} is out of range"
        )));
    }
    Ok(par::map(links.len(), |i| {
        rank_in_row(&sims.row(links[i].0), links[i].1)
    }))
}

pub fn ranking_metrics<S: SimilaritySource + ?Sized>(
    sims: &S,
    links: &[(EntityId, EntityId)],
) -> Result<MetricReport> {
    MetricReport::from_ranks(&truth_ranks(sims, links)?)
}

/// Metrics of candidate distributions: rank by probability within each row.
pub fn belief_metrics(
    beliefs: &BeliefTable,
    links: &[(EntityId, EntityId)],
) -> Result<MetricReport> {
    let mut ranks = Vec::with_capacity(links.len());
    for &(s, t) in links {
        if s >= beliefs.len() {
            return Err(Error::Evaluation(format!(
                "source entity {s} has no belief row"
            )));
        }
        let row = beliefs.row(s);
        let sparse = SimilarityRow::Sparse(
            row.candidates
                .iter()
                .copied()
                .zip(row.probs.iter().copied())
                .collect(),
        );
        ranks.push(rank_in_row(&sparse, t));
    }
    MetricReport::from_ranks(&ranks)
}

/// Fraction of labelled or assigned entities whose target is shared with at
/// least one other source entity.
pub fn conflict_rate(state: &AlignmentState) -> f64 {
    let labels: Vec<EntityId> = state.labels().into_iter().flatten().collect();
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<EntityId, usize> = HashMap::new();
    for &t in &labels {
        *counts.entry(t).or_default() += 1;
    }
    labels.iter().filter(|t| counts[t] > 1).count() as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityProfile {
    /// `(source, PARIS score at its label)` for every labelled or assigned entity.
    pub scores: Vec<(EntityId, f64)>,
    pub mean: f64,
    /// Counts over `[0, 0.1), [0.1, 0.2), …, [0.9, 1]`.
    pub histogram: [usize; 10],
    pub conflict_rate: f64,
}

/// PARIS compatibility of each entity's current label under the point
/// assignment of `state`.
pub fn compatibility_profile(
    state: &AlignmentState,
    stats: &RelationStats,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
) -> CompatibilityProfile {
    let labels = state.labels();
    let entities: Vec<(EntityId, EntityId)> = labels
        .iter()
        .enumerate()
        .filter_map(|(e, t)| t.map(|t| (e, t)))
        .collect();
    let scores: Vec<(EntityId, f64)> = par::map(entities.len(), |i| {
        let (e, t) = entities[i];
        (e, paris_indicator(e, t, &labels, stats, source, target))
    });
    let mut histogram = [0usize; 10];
    for &(_, s) in &scores {
        histogram[((s * 10.0) as usize).min(9)] += 1;
    }
    let mean = if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(|s| s.1).sum::<f64>() / scores.len() as f64
    };
    CompatibilityProfile {
        scores,
        mean,
        histogram,
        conflict_rate: conflict_rate(state),
    }
}
