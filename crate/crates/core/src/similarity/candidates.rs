use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{rank_order, EmbeddingTable, SimilarityRow, SimilaritySource};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::par;

/// Top-`k` targets per source entity, ordered by (similarity desc, id asc).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    pub k: usize,
    pub num_target: usize,
    pub rows: Vec<Vec<(EntityId, f64)>>,
}

impl CandidateTable {
    pub fn candidates(&self, e: EntityId) -> &[(EntityId, f64)] {
        &self.rows[e]
    }

    pub fn top1(&self, e: EntityId) -> Option<EntityId> {
        self.rows[e].first().map(|c| c.0)
    }

    pub fn num_source(&self) -> usize {
        self.rows.len()
    }
}

/// An imported table only knows its listed candidates.
impl SimilaritySource for CandidateTable {
    fn num_source(&self) -> usize {
        self.rows.len()
    }

    fn num_target(&self) -> usize {
        self.num_target
    }

    fn row(&self, e: EntityId) -> SimilarityRow {
        SimilarityRow::Sparse(self.rows[e].clone())
    }
}

pub(crate) fn top_k(mut entries: Vec<(EntityId, f64)>, k: usize) -> Vec<(EntityId, f64)> {
    if entries.len() > k {
        entries.select_nth_unstable_by(k - 1, rank_order);
        entries.truncate(k);
    }
    entries.sort_by(rank_order);
    entries
}

pub fn build_candidate_table(emb: &EmbeddingTable, k: usize) -> CandidateTable {
    assert!(k >= 1, "k must be positive");
    let rows = par::map(emb.num_source(), |e| {
        top_k(emb.similarity_row(e).into_iter().enumerate().collect(), k)
    });
    CandidateTable {
        k,
        num_target: emb.num_target(),
        rows,
    }
}

pub fn import_candidate_table(
    path: impl AsRef<Path>,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    k: usize,
) -> Result<CandidateTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_candidate_table(&text, path, source, target, k)
}

/// Parse `source TAB target TAB similarity` lines, group by source, sort and
/// truncate to `k`. Every source entity must receive at least one candidate.
pub fn parse_candidate_table(
    text: &str,
    origin: &Path,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    k: usize,
) -> Result<CandidateTable> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let mut rows: Vec<Vec<(EntityId, f64)>> = vec![Vec::new(); source.num_entities()];
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_owned(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let lookup = |kg: &KnowledgeGraph, label: &str| {
            kg.entities().get(label).ok_or_else(|| Error::UnknownLabel {
                path: origin.to_owned(),
                line: i + 1,
                label: label.to_owned(),
            })
        };
        let s = lookup(source, fields[0])?;
        let t = lookup(target, fields[1])?;
        let sim: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("similarity `{}` is not a number", fields[2])))?;
        if !sim.is_finite() {
            return Err(parse_err(format!(
                "similarity `{}` is not finite",
                fields[2]
            )));
        }
        if !seen.insert((s, t)) {
            return Err(Error::DuplicateCandidate {
                path: origin.to_owned(),
                line: i + 1,
                source_label: fields[0].to_owned(),
                target_label: fields[1].to_owned(),
            });
        }
        rows[s].push((t, sim));
    }
    for (e, row) in rows.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::NoCandidates(source.entities().label(e).to_owned()));
        }
    }
    Ok(CandidateTable {
        k,
        num_target: target.num_entities(),
        rows: rows.into_iter().map(|r| top_k(r, k)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::Matrix;
    use proptest::prelude::*;

    fn table(src: Vec<Vec<f64>>, tgt: Vec<Vec<f64>>) -> EmbeddingTable {
        EmbeddingTable::from_entities(Matrix::from_rows(&src), Matrix::from_rows(&tgt))
    }

    #[test]
    fn identical_vector_ranks_first() {
        let t = table(
            vec![vec![0.6, 0.8]],
            vec![vec![1.0, 0.0], vec![0.6, 0.8], vec![-0.8, 0.6]],
        );
        let c = build_candidate_table(&t, 2);
        assert_eq!(c.rows[0][0].0, 1);
        assert!((c.rows[0][0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_is_zero_and_k_truncates() {
        let t = table(vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![0.0, -1.0]]);
        let c = build_candidate_table(&t, 5);
        assert_eq!(c.rows[0].len(), 2);
        assert!(c.rows[0].iter().all(|&(_, s)| s == 0.0));
        // exact tie: ascending id
        assert_eq!(c.rows[0][0].0, 0);
    }

    fn kgs() -> (KnowledgeGraph, KnowledgeGraph) {
        (
            KnowledgeGraph::from_labels([("a", "r", "b")]),
            KnowledgeGraph::from_labels([("x", "r", "y"), ("y", "r", "z")]),
        )
    }

    #[test]
    fn import_groups_and_sorts() {
        let (s, t) = kgs();
        let text = "a\tx\t0.1\na\tz\t0.9\na\ty\t0.5\nb\ty\t0.3\n";
        let c = parse_candidate_table(text, Path::new("m"), &s, &t, 10).unwrap();
        assert_eq!(c.rows[0], vec![(2, 0.9), (1, 0.5), (0, 0.1)]);
        assert_eq!(c.rows[1], vec![(1, 0.3)]);
        let c = parse_candidate_table(text, Path::new("m"), &s, &t, 2).unwrap();
        assert_eq!(c.rows[0].len(), 2);
    }

    #[test]
    fn import_errors() {
        let (s, t) = kgs();
        let p = Path::new("m");
        assert!(matches!(
            parse_candidate_table("a\tx\tabc\nb\tx\t1\n", p, &s, &t, 3),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_candidate_table("a\tx\t0.1\na\tx\t0.2\nb\tx\t1\n", p, &s, &t, 3),
            Err(Error::DuplicateCandidate { line: 2, .. })
        ));
        assert!(matches!(
            parse_candidate_table("a\tq\t0.1\n", p, &s, &t, 3),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(matches!(
            parse_candidate_table("a\tx\t0.1\n", p, &s, &t, 3),
            Err(Error::NoCandidates(_))
        ));
    }

    proptest! {
        #[test]
        fn candidate_order_is_canonical(
            vecs in prop::collection::vec(prop::collection::vec(-3i8..3, 3), 2..8),
            rot in 0usize..8,
        ) {
            // small integer vectors produce plenty of exact ties
            let rows: Vec<Vec<f64>> = vecs.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
            let n = rows.len();
            let k = 3;
            let base = build_candidate_table(&table(rows.clone(), rows.clone()), k);
            // rotating the source enumeration permutes rows, never their contents
            let r = rot % n;
            let rotated: Vec<Vec<f64>> = rows[r..].iter().chain(&rows[..r]).cloned().collect();
            let other = build_candidate_table(&table(rotated, rows.clone()), k);
            for e in 0..n {
                prop_assert_eq!(&base.rows[(e + r) % n], &other.rows[e]);
                for w in base.rows[e].windows(2) {
                    prop_assert_eq!(rank_order(&w[0], &w[1]), std::cmp::Ordering::Less);
                }
            }
        }
    }
}
