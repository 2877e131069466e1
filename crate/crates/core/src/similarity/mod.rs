//! Similarity scores `s(e, e')` between source and target entities: a trainable
//! translational baseline encoder and an import path for external dumps.

mod candidates;
mod encoder;

use serde::{Deserialize, Serialize};

use crate::kg::EntityId;

pub use candidates::{
    build_candidate_table, import_candidate_table, parse_candidate_table, CandidateTable,
};
pub use encoder::{
    fine_tune, init_embeddings, seed_alignment_loss, train_baseline_encoder, EncoderConfig,
    EpochLoss,
};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dim), "ragged rows");
        Self {
            rows: rows.len(),
            dim,
            data: rows.concat(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normalize_rows(&mut self) {
        for i in 0..self.rows {
            let r = self.row_mut(i);
            let n = norm(r);
            if n > 0.0 {
                r.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Entity (and relation) embeddings for a graph pair. Relation rows are shared
/// between the graphs when their labels coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub source: Matrix,
    pub target: Matrix,
    pub relations: Matrix,
    pub source_relation_row: Vec<usize>,
    pub target_relation_row: Vec<usize>,
}

impl EmbeddingTable {
    /// Entity-only table; relation rows are empty. Mostly useful in tests and
    /// for externally produced embeddings.
    pub fn from_entities(source: Matrix, target: Matrix) -> Self {
        assert_eq!(source.dim, target.dim);
        Self {
            dim: source.dim,
            source,
            target,
            relations: Matrix::zeros(0, 0),
            source_relation_row: Vec::new(),
            target_relation_row: Vec::new(),
        }
    }

    pub fn num_source(&self) -> usize {
        self.source.rows
    }

    pub fn num_target(&self) -> usize {
        self.target.rows
    }

    /// Cosine similarity of source `e` to every target entity.
    pub fn similarity_row(&self, e: EntityId) -> Vec<f64> {
        let v = self.source.row(e);
        (0..self.target.rows)
            .map(|t| cosine(v, self.target.row(t)))
            .collect()
    }
}

/// Similarities of one source entity: a complete row over all targets, or a
/// sparse list when only some candidates are known.
#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityRow {
    Dense(Vec<f64>),
    Sparse(Vec<(EntityId, f64)>),
}

impl SimilarityRow {
    pub fn entries(&self) -> Vec<(EntityId, f64)> {
        match self {
            SimilarityRow::Dense(v) => v.iter().copied().enumerate().collect(),
            SimilarityRow::Sparse(v) => v.clone(),
        }
    }

    pub fn get(&self, t: EntityId) -> Option<f64> {
        match self {
            SimilarityRow::Dense(v) => v.get(t).copied(),
            SimilarityRow::Sparse(v) => v.iter().find(|(id, _)| *id == t).map(|(_, s)| *s),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SimilarityRow::Dense(v) => v.is_empty(),
            SimilarityRow::Sparse(v) => v.is_empty(),
        }
    }
}

/// Anything that can produce per-source similarity rows.
pub trait SimilaritySource: Sync {
    fn num_source(&self) -> usize;
    fn num_target(&self) -> usize;
    fn row(&self, e: EntityId) -> SimilarityRow;
}

impl SimilaritySource for EmbeddingTable {
    fn num_source(&self) -> usize {
        self.source.rows
    }

    fn num_target(&self) -> usize {
        self.target.rows
    }

    fn row(&self, e: EntityId) -> SimilarityRow {
        SimilarityRow::Dense(self.similarity_row(e))
    }
}

/// Plain dense similarity matrix (`source × target`).
impl SimilaritySource for Matrix {
    fn num_source(&self) -> usize {
        self.rows
    }

    fn num_target(&self) -> usize {
        self.dim
    }

    fn row(&self, e: EntityId) -> SimilarityRow {
        SimilarityRow::Dense(Matrix::row(self, e).to_vec())
    }
}

/// Descending similarity, ascending id.
pub(crate) fn rank_order(a: &(EntityId, f64), b: &(EntityId, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}
