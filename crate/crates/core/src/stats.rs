//! Relation statistics for the PARIS indicator: (inverse) functionality per
//! relation and smoothed cross-graph subrelation probabilities estimated from
//! the current point alignment.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::kg::{EntityId, KnowledgeGraph, RelationId};

/// Smoothing strength for subrelation estimates.
pub const SUB_LAMBDA: f64 = 1.0;
/// Prior subrelation probability.
pub const SUB_PRIOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Functionality {
    /// `|distinct heads| / |triples|`; `None` for relations without triples.
    pub fun: Vec<Option<f64>>,
    /// `|distinct tails| / |triples|`.
    pub inv_fun: Vec<Option<f64>>,
}

impl Functionality {
    pub fn fun(&self, r: RelationId) -> f64 {
        self.fun[r].unwrap_or(0.0)
    }

    pub fn inv_fun(&self, r: RelationId) -> f64 {
        self.inv_fun[r].unwrap_or(0.0)
    }
}

pub fn functionality(kg: &KnowledgeGraph) -> Functionality {
    let m = kg.num_relations();
    let mut count = vec![0usize; m];
    let mut heads: Vec<HashSet<EntityId>> = vec![HashSet::new(); m];
    let mut tails: Vec<HashSet<EntityId>> = vec![HashSet::new(); m];
    for t in kg.triples() {
        count[t.relation] += 1;
        heads[t.relation].insert(t.head);
        tails[t.relation].insert(t.tail);
    }
    let ratio = |sets: &[HashSet<EntityId>]| -> Vec<Option<f64>> {
        sets.iter()
            .zip(&count)
            .map(|(s, &c)| (c > 0).then(|| s.len() as f64 / c as f64))
            .collect()
    };
    Functionality {
        fun: ratio(&heads),
        inv_fun: ratio(&tails),
    }
}

/// Hit/support counts for both inclusion directions. Probabilities are
/// `(hits + λ·p₀) / (support + λ)`; relations with zero support yield 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubrelationProbs {
    pub lambda: f64,
    pub prior: f64,
    /// Per source relation: triples with both endpoints aligned.
    pub forward_support: Vec<usize>,
    /// `(r, r')` → number of supported `r` triples mirrored by `r'`.
    pub forward_hits: BTreeMap<(RelationId, RelationId), usize>,
    /// Per target relation: triples whose endpoints both have preimages.
    pub backward_support: Vec<usize>,
    /// `(r', r)` → number of supported `r'` triples mirrored by `r`.
    pub backward_hits: BTreeMap<(RelationId, RelationId), usize>,
}

impl SubrelationProbs {
    fn estimate(&self, hits: usize, support: usize) -> f64 {
        if support == 0 {
            0.0
        } else {
            (hits as f64 + self.lambda * self.prior) / (support as f64 + self.lambda)
        }
    }

    /// `Pr(r ⊆ r')` for source relation `r`, target relation `r'`.
    pub fn source_in_target(&self, r: RelationId, r_t: RelationId) -> f64 {
        let hits = self.forward_hits.get(&(r, r_t)).copied().unwrap_or(0);
        self.estimate(hits, self.forward_support[r])
    }

    /// `Pr(r' ⊆ r)` for target relation `r'`, source relation `r`.
    pub fn target_in_source(&self, r_t: RelationId, r: RelationId) -> f64 {
        let hits = self.backward_hits.get(&(r_t, r)).copied().unwrap_or(0);
        self.estimate(hits, self.backward_support[r_t])
    }
}

/// Estimate subrelation probabilities from point labels (`labels[e]` is the
/// current target of source `e`, if any).
pub fn subrelation_probs(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    labels: &[Option<EntityId>],
) -> SubrelationProbs {
    let mut forward_support = vec![0usize; source.num_relations()];
    let mut forward_hits = BTreeMap::new();
    for t in source.triples() {
        let lookup = |e: EntityId| labels.get(e).copied().flatten();
        let (Some(x), Some(y)) = (lookup(t.head), lookup(t.tail)) else {
            continue;
        };
        forward_support[t.relation] += 1;
        let mut mirrored: Vec<RelationId> = target.relations_between(x, y).collect();
        mirrored.sort_unstable();
        mirrored.dedup();
        for r_t in mirrored {
            *forward_hits.entry((t.relation, r_t)).or_insert(0) += 1;
        }
    }

    let mut preimage: Vec<Vec<EntityId>> = vec![Vec::new(); target.num_entities()];
    for (e, l) in labels.iter().enumerate() {
        if let Some(t) = l {
            preimage[*t].push(e);
        }
    }
    let mut backward_support = vec![0usize; target.num_relations()];
    let mut backward_hits = BTreeMap::new();
    for t in target.triples() {
        let (px, py) = (&preimage[t.head], &preimage[t.tail]);
        if px.is_empty() || py.is_empty() {
            continue;
        }
        backward_support[t.relation] += 1;
        let mut mirrored: Vec<RelationId> = px
            .iter()
            .flat_map(|&x| py.iter().flat_map(move |&y| source.relations_between(x, y)))
            .collect();
        mirrored.sort_unstable();
        mirrored.dedup();
        for r in mirrored {
            *backward_hits.entry((t.relation, r)).or_insert(0) += 1;
        }
    }

    SubrelationProbs {
        lambda: SUB_LAMBDA,
        prior: SUB_PRIOR,
        forward_support,
        forward_hits,
        backward_support,
        backward_hits,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationStats {
    pub source: Functionality,
    pub target: Functionality,
    pub sub: SubrelationProbs,
}

pub fn relation_stats(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    labels: &[Option<EntityId>],
) -> RelationStats {
    RelationStats {
        source: functionality(source),
        target: functionality(target),
        sub: subrelation_probs(source, target, labels),
    }
}
