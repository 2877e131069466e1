use super::{FactorSubset, LabelView, Override, RuleWeights, Rules};
use crate::kg::EntityId;
use crate::normalizer::log_sum_exp;

/// `exp(Σ_κ φ_κ g_κ + φ0)`.
pub fn local_compatibility(weights: &RuleWeights, g: &[f64]) -> f64 {
    weighted(weights, g).exp()
}

fn weighted(weights: &RuleWeights, g: &[f64]) -> f64 {
    debug_assert_eq!(weights.phi.len(), g.len());
    weights.phi.iter().zip(g).map(|(p, g)| p * g).sum::<f64>() + weights.phi0
}

/// Factor subsets over the source entities plus the rules scoring them.
pub struct CompatibilityModel<R> {
    factors: Vec<FactorSubset>,
    containing: Vec<Vec<usize>>,
    rules: R,
}

impl<R: Rules> CompatibilityModel<R> {
    pub fn new(num_source: usize, factors: Vec<FactorSubset>, rules: R) -> Self {
        let mut containing = vec![Vec::new(); num_source];
        for (i, f) in factors.iter().enumerate() {
            for &m in &f.members {
                containing[m].push(i);
            }
        }
        Self {
            factors,
            containing,
            rules,
        }
    }

    pub fn factors(&self) -> &[FactorSubset] {
        &self.factors
    }

    pub fn rules(&self) -> &R {
        &self.rules
    }

    pub fn num_rules(&self) -> usize {
        self.rules.num_rules()
    }

    pub fn num_source(&self) -> usize {
        self.containing.len()
    }

    /// Indices of the factors containing `e`.
    pub fn factors_containing(&self, e: EntityId) -> &[usize] {
        &self.containing[e]
    }

    /// Every entity sharing a factor with `e`, excluding `e`; ascending.
    pub fn markov_blanket(&self, e: EntityId) -> Vec<EntityId> {
        let mut mb: Vec<EntityId> = self.containing[e]
            .iter()
            .flat_map(|&f| self.factors[f].members.iter().copied())
            .filter(|&m| m != e)
            .collect();
        mb.sort_unstable();
        mb.dedup();
        mb
    }

    pub fn indicators(&self, factor: usize, labels: &dyn LabelView) -> Vec<f64> {
        let mut g = vec![0.0; self.num_rules()];
        self.rules.indicators(&self.factors[factor], labels, &mut g);
        g
    }

    /// `G_κ(e')`: indicator sums over the factors containing `e`, with `e`
    /// set to `candidate` and everything else read from `labels`.
    pub fn features(&self, e: EntityId, candidate: EntityId, labels: &dyn LabelView) -> Vec<f64> {
        let view = Override {
            base: labels,
            entity: e,
            target: candidate,
        };
        let mut total = vec![0.0; self.num_rules()];
        let mut g = vec![0.0; self.num_rules()];
        for &f in &self.containing[e] {
            self.rules.indicators(&self.factors[f], &view, &mut g);
            total.iter_mut().zip(&g).for_each(|(t, g)| *t += g);
        }
        total
    }

    /// `log Π_F l(y_F)` over all factors.
    pub fn log_potential(&self, weights: &RuleWeights, labels: &dyn LabelView) -> f64 {
        (0..self.factors.len())
            .map(|f| weighted(weights, &self.indicators(f, labels)))
            .sum()
    }

    /// Unnormalized log-conditional of each candidate. `φ0` is left out
    /// because it is common to every candidate.
    pub fn scores(
        &self,
        e: EntityId,
        weights: &RuleWeights,
        candidates: &[EntityId],
        labels: &dyn LabelView,
    ) -> Vec<f64> {
        candidates
            .iter()
            .map(|&c| score_of(weights, &self.features(e, c, labels)))
            .collect()
    }

    /// `γ · softmax(score)` over `candidates`.
    pub fn conditional(
        &self,
        e: EntityId,
        weights: &RuleWeights,
        candidates: &[EntityId],
        gamma: f64,
        labels: &dyn LabelView,
    ) -> Vec<f64> {
        truncated_softmax(&self.scores(e, weights, candidates, labels), gamma)
    }
}

pub(crate) fn score_of(weights: &RuleWeights, features: &[f64]) -> f64 {
    weights.phi.iter().zip(features).map(|(p, g)| p * g).sum()
}

pub(crate) fn truncated_softmax(scores: &[f64], gamma: f64) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| gamma * (s - lse).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compatibility::{build_paris_factors, AvoidConfRules, ParisRules, RuleSetKind};
    use crate::kg::KnowledgeGraph;
    use crate::stats::relation_stats;

    #[test]
    fn local_compatibility_values() {
        let w = RuleWeights::zeros(2);
        assert_eq!(local_compatibility(&w, &[0.3, 1.0]), 1.0);
        let w = RuleWeights {
            phi: vec![2.0],
            phi0: 0.0,
        };
        assert!((local_compatibility(&w, &[0.75]) - 1.5f64.exp()).abs() < 1e-12);
        assert!((local_compatibility(&w, &[0.75]) - 4.4817).abs() < 1e-4);
    }

    #[test]
    fn two_candidate_softmax() {
        let p = truncated_softmax(&[0.75, 0.0], 1.0);
        let a = 0.75f64.exp() / (0.75f64.exp() + 1.0);
        assert!((p[0] - a).abs() < 1e-15 && (p[1] - (1.0 - a)).abs() < 1e-15);
        assert!((p[0] - 0.6792).abs() < 1e-4);
    }

    fn conflict_model() -> CompatibilityModel<AvoidConfRules> {
        let factors = (0..3)
            .map(|a| FactorSubset::new(a, vec![0, 1, 2], RuleSetKind::AvoidConf))
            .collect();
        CompatibilityModel::new(
            3,
            factors,
            AvoidConfRules {
                top1: vec![Some(0), Some(0), Some(2)],
            },
        )
    }

    #[test]
    fn avoidconf_scores_by_hand() {
        let m = conflict_model();
        let w = RuleWeights {
            phi: vec![1.0, 5.0],
            phi0: 0.0,
        };
        let y = vec![Some(0), Some(0), Some(2)];
        assert_eq!(m.scores(0, &w, &[0, 2], &y), vec![8.0, 7.0]);
        assert_eq!(m.scores(1, &w, &[0, 1], &y), vec![8.0, 17.0]);
        assert_eq!(m.scores(2, &w, &[2, 1], &y), vec![8.0, 7.0]);
    }

    #[test]
    fn zero_weights_uniform_and_phi0_cancels() {
        let m = conflict_model();
        let y = vec![Some(0), Some(0), Some(2)];
        let p = m.conditional(1, &RuleWeights::zeros(2), &[0, 1, 2], 0.9, &y);
        assert!(p.iter().all(|&x| (x - 0.3).abs() < 1e-15));
        let mut w = RuleWeights {
            phi: vec![0.4, -1.3],
            phi0: 0.0,
        };
        let a = m.conditional(0, &w, &[0, 1, 2], 1.0, &y);
        w.phi0 = 123.0;
        assert_eq!(a, m.conditional(0, &w, &[0, 1, 2], 1.0, &y));
    }

    #[test]
    fn paris_blanket_is_symmetric() {
        let kg = KnowledgeGraph::from_labels([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("d", "s", "a"),
            ("e", "s", "e2"),
        ]);
        let stats = relation_stats(&kg, &kg, &[]);
        let m = CompatibilityModel::new(
            kg.num_entities(),
            build_paris_factors(&kg),
            ParisRules {
                source: &kg,
                target: &kg,
                stats: &stats,
            },
        );
        for e in 0..kg.num_entities() {
            let mb = m.markov_blanket(e);
            assert!(!mb.contains(&e));
            for n in mb {
                assert!(m.markov_blanket(n).contains(&e));
            }
        }
        // a's factor holds b and d; b's holds a and c
        assert_eq!(m.markov_blanket(0), vec![1, 2, 3]);
    }
}
