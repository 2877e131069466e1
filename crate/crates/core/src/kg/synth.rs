//! Desk-scale benchmark generator: one random base graph, two independently
//! perturbed copies, identity ground truth.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EntityId, KnowledgeGraph};
use crate::error::{Error, Result};
use crate::rng::phase_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPairConfig {
    pub entity_count: usize,
    pub relation_count: usize,
    pub mean_degree: f64,
    /// Per-copy probability of dropping each base triple.
    pub edge_dropout: f64,
    /// Give the two copies disjoint relation labels.
    #[serde(default)]
    pub relation_rename: bool,
    pub rng_seed: u64,
}

impl SyntheticPairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entity_count < 2 {
            return Err(Error::Config("entity_count must be at least 2".into()));
        }
        if self.relation_count < 1 {
            return Err(Error::Config("relation_count must be at least 1".into()));
        }
        if !(self.mean_degree.is_finite() && self.mean_degree > 0.0) {
            return Err(Error::Config("mean_degree must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_dropout) {
            return Err(Error::Config("edge_dropout must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Number of distinct base triples: half the degree sum, rounded.
    pub fn base_triple_count(&self) -> usize {
        (self.entity_count as f64 * self.mean_degree / 2.0).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub source: KnowledgeGraph,
    pub target: KnowledgeGraph,
    /// Identity correspondence restricted to entities present in both copies,
    /// ascending by source id.
    pub truth: Vec<(EntityId, EntityId)>,
}

pub fn entity_label(base: usize, copy: u8) -> String {
    format!("e{base}_{copy}")
}

pub fn generate_synthetic_pair(config: &SyntheticPairConfig) -> Result<SyntheticPair> {
    config.validate()?;
    let n = config.entity_count;
    let m = config.relation_count;
    let wanted = config.base_triple_count();
    let capacity = n * (n - 1) * m;
    if wanted == 0 {
        return Err(Error::Generation(
            "mean_degree too low: base graph has no triples".into(),
        ));
    }
    if wanted > capacity {
        return Err(Error::Generation(format!(
            "{wanted} distinct triples requested but only {capacity} are possible"
        )));
    }

    let mut rng = phase_rng(config.rng_seed, "synth-base");
    let mut seen = HashSet::with_capacity(wanted);
    let mut base = Vec::with_capacity(wanted);
    while base.len() < wanted {
        let h = rng.gen_range(0..n);
        let mut t = rng.gen_range(0..n - 1);
        if t >= h {
            t += 1;
        }
        let r = rng.gen_range(0..m);
        if seen.insert((h, r, t)) {
            base.push((h, r, t));
        }
    }

    let copy = |c: u8| -> Result<KnowledgeGraph> {
        let mut rng = phase_rng(config.rng_seed, &format!("synth-copy-{c}"));
        let mut kept: Vec<(String, String, String)> = base
            .iter()
            .filter(|_| config.edge_dropout == 0.0 || rng.gen::<f64>() >= config.edge_dropout)
            .map(|&(h, r, t)| {
                let rel = if config.relation_rename {
                    format!("r{r}_{c}")
                } else {
                    format!("r{r}")
                };
                (entity_label(h, c), rel, entity_label(t, c))
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::Generation(format!("copy {c} has no triples")));
        }
        // Independent triple order per copy keeps id assignment uncorrelated.
        kept.shuffle(&mut rng);
        Ok(KnowledgeGraph::from_labels(
            kept.iter()
                .map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())),
        ))
    };

    let source = copy(1)?;
    let target = copy(2)?;
    let mut truth: Vec<(EntityId, EntityId)> = (0..n)
        .filter_map(|i| {
            let s = source.entities().get(&entity_label(i, 1))?;
            let t = target.entities().get(&entity_label(i, 2))?;
            Some((s, t))
        })
        .collect();
    truth.sort_unstable();
    Ok(SyntheticPair {
        source,
        target,
        truth,
    })
}
