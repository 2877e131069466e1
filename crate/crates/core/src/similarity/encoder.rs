//! Translational baseline encoder.
//!
//! Each graph is embedded with a margin ranking loss over `‖h + r − t‖`
//! against uniformly corrupted triples; the two embedding spaces are tied by a
//! squared-distance anchoring loss over aligned pairs. Entity rows are
//! projected back onto the unit sphere after every epoch, so cosine similarity
//! equals the dot product downstream.

use std::collections::HashMap;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm, EmbeddingTable, Matrix};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::rng::phase_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub dim: usize,
    pub margin: f64,
    pub negatives: usize,
    /// Epochs for the initial training on seeds.
    pub epochs: usize,
    /// Epochs for each retraining round inside the EM loop.
    pub retrain_epochs: usize,
    pub learning_rate: f64,
    /// Weight of the anchoring loss `Σ ‖h_e − h_e'‖²`.
    pub alignment_weight: f64,
    pub rng_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            margin: 1.0,
            negatives: 5,
            epochs: 200,
            retrain_epochs: 50,
            learning_rate: 0.01,
            alignment_weight: 10.0,
            rng_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.negatives == 0 {
            return Err(Error::Config(
                "encoder dim and negatives must be positive".into(),
            ));
        }
        if !(self.margin > 0.0 && self.learning_rate > 0.0 && self.alignment_weight > 0.0) {
            return Err(Error::Config(
                "encoder margin, learning_rate and alignment_weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub triple: f64,
    pub alignment: f64,
}

/// Unit-normalized random entity rows; relation rows uniform in `±6/√dim`.
pub fn init_embeddings(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    dim: usize,
    seed: u64,
) -> EmbeddingTable {
    let mut rng = phase_rng(seed, "encoder-init");
    let mut random = |rows: usize, scale: f64| {
        let mut m = Matrix::zeros(rows, dim);
        m.data
            .iter_mut()
            .for_each(|x| *x = rng.gen_range(-scale..scale));
        m
    };
    let mut src = random(source.num_entities(), 1.0);
    let mut tgt = random(target.num_entities(), 1.0);
    src.normalize_rows();
    tgt.normalize_rows();

    let mut joint: HashMap<String, usize> = HashMap::new();
    let mut rows_for = |labels: &[String]| -> Vec<usize> {
        labels
            .iter()
            .map(|l| {
                let next = joint.len();
                *joint.entry(l.clone()).or_insert(next)
            })
            .collect()
    };
    let source_relation_row = rows_for(source.relations().labels());
    let target_relation_row = rows_for(target.relations().labels());
    let n_rel = joint.len();
    let relations = random(n_rel, 6.0 / (dim as f64).sqrt());

    EmbeddingTable {
        dim,
        source: src,
        target: tgt,
        relations,
        source_relation_row,
        target_relation_row,
    }
}

fn validate_pairs(seeds: &[(EntityId, EntityId)], extra: &[(EntityId, EntityId)]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config(
            "encoder training needs at least one seed link".into(),
        ));
    }
    let seeded: HashSet<EntityId> = seeds.iter().map(|p| p.0).collect();
    if let Some(p) = extra.iter().find(|p| seeded.contains(&p.0)) {
        return Err(Error::Config(format!(
            "extra pair source {} overlaps the seed links",
            p.0
        )));
    }
    Ok(())
}

/// Initialize and train from scratch.
pub fn train_baseline_encoder(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    seeds: &[(EntityId, EntityId)],
    config: &EncoderConfig,
    extra: &[(EntityId, EntityId)],
) -> Result<(EmbeddingTable, Vec<EpochLoss>)> {
    config.validate()?;
    validate_pairs(seeds, extra)?;
    let mut table = init_embeddings(source, target, config.dim, config.rng_seed);
    let log = fine_tune(
        &mut table,
        source,
        target,
        seeds,
        extra,
        config,
        config.epochs,
        phase_rng(config.rng_seed, "encoder-train"),
    )?;
    Ok((table, log))
}

/// Mean anchoring loss `‖h_e − h_e'‖²` over `pairs`.
pub fn seed_alignment_loss(table: &EmbeddingTable, pairs: &[(EntityId, EntityId)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|&(s, t)| {
            table
                .source
                .row(s)
                .iter()
                .zip(table.target.row(t))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / pairs.len() as f64
}

#[derive(Clone, Copy)]
enum Side {
    Source,
    Target,
}

/// Continue training `table` for `epochs` epochs.
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    table: &mut EmbeddingTable,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    seeds: &[(EntityId, EntityId)],
    extra: &[(EntityId, EntityId)],
    config: &EncoderConfig,
    epochs: usize,
    mut rng: ChaCha8Rng,
) -> Result<Vec<EpochLoss>> {
    config.validate()?;
    validate_pairs(seeds, extra)?;
    let dim = table.dim;
    let lr = config.learning_rate;
    let align_step = (2.0 * lr * config.alignment_weight).min(0.5);

    let mut positives: Vec<(Side, usize)> = (0..source.triples().len())
        .map(|i| (Side::Source, i))
        .chain((0..target.triples().len()).map(|i| (Side::Target, i)))
        .collect();
    let pairs: Vec<(EntityId, EntityId)> = seeds.iter().chain(extra).copied().collect();

    let mut pos = vec![0.0; dim];
    let mut neg = vec![0.0; dim];
    let mut log = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        positives.shuffle(&mut rng);
        let mut triple_loss = 0.0;
        for &(side, i) in &positives {
            let (kg, rel_rows) = match side {
                Side::Source => (source, &table.source_relation_row),
                Side::Target => (target, &table.target_relation_row),
            };
            let t = kg.triples()[i];
            let r = rel_rows[t.relation];
            let n = kg.num_entities();
            for _ in 0..config.negatives {
                let (mut nh, mut nt) = (t.head, t.tail);
                if n > 1 {
                    let mut c = rng.gen_range(0..n - 1);
                    if rng.gen_bool(0.5) {
                        if c >= t.head {
                            c += 1;
                        }
                        nh = c;
                    } else {
                        if c >= t.tail {
                            c += 1;
                        }
                        nt = c;
                    }
                }
                let ents = match side {
                    Side::Source => &table.source,
                    Side::Target => &table.target,
                };
                let rel = table.relations.row(r);
                translate(ents.row(t.head), rel, ents.row(t.tail), &mut pos);
                translate(ents.row(nh), rel, ents.row(nt), &mut neg);
                let dp = norm(&pos);
                let dn = norm(&neg);
                let violation = config.margin + dp - dn;
                if violation <= 0.0 {
                    continue;
                }
                triple_loss += violation;
                scale_unit(&mut pos, dp);
                scale_unit(&mut neg, dn);
                let ents = match side {
                    Side::Source => &mut table.source,
                    Side::Target => &mut table.target,
                };
                axpy(ents.row_mut(t.head), -lr, &pos);
                axpy(ents.row_mut(t.tail), lr, &pos);
                axpy(ents.row_mut(nh), lr, &neg);
                axpy(ents.row_mut(nt), -lr, &neg);
                let rel = table.relations.row_mut(r);
                axpy(rel, -lr, &pos);
                axpy(rel, lr, &neg);
            }
        }

        let mut align_loss = 0.0;
        for &(s, t) in &pairs {
            for (d, (a, b)) in pos
                .iter_mut()
                .zip(table.source.row(s).iter().zip(table.target.row(t)))
            {
                *d = a - b;
            }
            align_loss += config.alignment_weight * pos.iter().map(|x| x * x).sum::<f64>();
            axpy(table.source.row_mut(s), -align_step, &pos);
            axpy(table.target.row_mut(t), align_step, &pos);
        }

        table.source.normalize_rows();
        table.target.normalize_rows();
        if !(triple_loss.is_finite() && align_loss.is_finite()) {
            return Err(Error::Divergence("encoder loss is not finite".into()));
        }
        log.push(EpochLoss {
            triple: triple_loss,
            alignment: align_loss,
        });
    }
    Ok(log)
}

fn translate(h: &[f64], r: &[f64], t: &[f64], out: &mut [f64]) {
    for (o, ((h, r), t)) in out.iter_mut().zip(h.iter().zip(r).zip(t)) {
        *o = h + r - t;
    }
}

fn scale_unit(v: &mut [f64], n: f64) {
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}
