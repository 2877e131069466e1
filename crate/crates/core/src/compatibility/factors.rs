use super::{FactorSubset, RuleSetKind};
use crate::kg::KnowledgeGraph;
use crate::par;
use crate::similarity::{cosine, rank_order, EmbeddingTable};

/// One factor per entity: the entity and its one-hop neighbours, both
/// directions.
pub fn build_paris_factors(kg: &KnowledgeGraph) -> Vec<FactorSubset> {
    (0..kg.num_entities())
        .map(|e| FactorSubset::new(e, kg.neighbours(e), RuleSetKind::Paris))
        .collect()
}

/// One factor per source entity: the entity and its `n` nearest source
/// entities by embedding cosine (ties to the lower id).
pub fn build_avoidconf_factors(emb: &EmbeddingTable, n: usize) -> Vec<FactorSubset> {
    assert!(n >= 1, "neighbourhood size must be positive");
    let src = &emb.source;
    par::map(src.rows, |e| {
        let mut sims: Vec<(usize, f64)> = (0..src.rows)
            .filter(|&o| o != e)
            .map(|o| (o, cosine(src.row(e), src.row(o))))
            .collect();
        sims.sort_by(rank_order);
        sims.truncate(n);
        FactorSubset::new(
            e,
            sims.into_iter().map(|s| s.0).collect(),
            RuleSetKind::AvoidConf,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::Matrix;

    #[test]
    fn paris_factor_counts_both_directions() {
        let kg = KnowledgeGraph::from_labels([("e", "r", "a"), ("b", "s", "e"), ("z", "r", "z2")]);
        let f = build_paris_factors(&kg);
        assert_eq!(f.len(), kg.num_entities());
        let e = kg.entities().get("e").unwrap();
        let mut want = vec![
            e,
            kg.entities().get("a").unwrap(),
            kg.entities().get("b").unwrap(),
        ];
        want.sort();
        assert_eq!(f[e].members, want);
    }

    #[test]
    fn avoidconf_saturates_and_pairs_identical() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.2],
        ];
        let emb = EmbeddingTable::from_entities(Matrix::from_rows(&rows), Matrix::from_rows(&rows));
        let f = build_avoidconf_factors(&emb, 1);
        assert_eq!(f[0].members, vec![0, 2]);
        assert_eq!(f[2].members, vec![0, 2]);
        let all = build_avoidconf_factors(&emb, 10);
        assert!(all.iter().all(|f| f.members == vec![0, 1, 2, 3]));
        assert_eq!(build_avoidconf_factors(&emb, 2)[1].members.len(), 3);
    }
}
