use super::{FactorSubset, LabelView, INDICATOR_CEILING};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::stats::RelationStats;

/// Indicator functions over factor subsets.
pub trait Rules: Sync {
    fn num_rules(&self) -> usize;

    /// Write `g_κ(y_F)` for every rule into `out`.
    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]);
}

impl<R: Rules + ?Sized> Rules for &R {
    fn num_rules(&self) -> usize {
        (**self).num_rules()
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        (**self).indicators(factor, labels, out)
    }
}

impl<R: Rules + ?Sized + Send> Rules for Box<R> {
    fn num_rules(&self) -> usize {
        (**self).num_rules()
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        (**self).indicators(factor, labels, out)
    }
}

/// Probabilistic PARIS rule `Pr(e ≡ e')`.
///
/// Every pair of same-direction incidences `r(e, n)` and `r'(e', n')` whose
/// neighbours are currently matched (`ŷ_n = n'`) multiplies the product by
/// `(1 − Pr(r' ⊆ r)·fun⁻¹(r)·p)·(1 − Pr(r ⊆ r')·fun⁻¹(r')·p)`, with `p` the
/// match probability of the neighbours. Incoming triples are read as inverse
/// relations, for which the inverse functionality is the forward
/// functionality and subsumption carries over unchanged.
pub fn paris_indicator(
    e: EntityId,
    candidate: EntityId,
    labels: &dyn LabelView,
    stats: &RelationStats,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
) -> f64 {
    let mut keep = 1.0;
    for inc in source.adjacency(e) {
        for inc_t in target.adjacency(candidate) {
            if inc.outgoing != inc_t.outgoing {
                continue;
            }
            let p = labels.prob(inc.neighbour, inc_t.neighbour);
            if p == 0.0 {
                continue;
            }
            let (ifun_s, ifun_t) = if inc.outgoing {
                (
                    stats.source.inv_fun(inc.relation),
                    stats.target.inv_fun(inc_t.relation),
                )
            } else {
                (
                    stats.source.fun(inc.relation),
                    stats.target.fun(inc_t.relation),
                )
            };
            let t_in_s = stats.sub.target_in_source(inc_t.relation, inc.relation);
            let s_in_t = stats.sub.source_in_target(inc.relation, inc_t.relation);
            keep *= (1.0 - t_in_s * ifun_s * p) * (1.0 - s_in_t * ifun_t * p);
        }
    }
    (1.0 - keep).clamp(0.0, INDICATOR_CEILING)
}

pub struct ParisRules<'a> {
    pub source: &'a KnowledgeGraph,
    pub target: &'a KnowledgeGraph,
    pub stats: &'a RelationStats,
}

impl Rules for ParisRules<'_> {
    fn num_rules(&self) -> usize {
        1
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        out[0] = match labels.label(factor.anchor) {
            Some(c) => paris_indicator(
                factor.anchor,
                c,
                labels,
                self.stats,
                self.source,
                self.target,
            ),
            None => 0.0,
        };
    }
}

/// `(g1, g2)`: the anchor follows the neural top-1, and no other labelled
/// member of the factor shares the anchor's label.
pub fn avoidconf_indicators(
    factor: &FactorSubset,
    labels: &dyn LabelView,
    top1: Option<EntityId>,
) -> (f64, f64) {
    let Some(y) = labels.label(factor.anchor) else {
        return (0.0, 0.0);
    };
    let eq_neu = if top1 == Some(y) { 1.0 } else { 0.0 };
    let unique = factor
        .members
        .iter()
        .filter(|&&m| m != factor.anchor)
        .all(|&m| labels.label(m) != Some(y));
    (eq_neu, if unique { 1.0 } else { 0.0 })
}

pub struct AvoidConfRules {
    /// Neural top-1 target per source entity.
    pub top1: Vec<Option<EntityId>>,
}

impl Rules for AvoidConfRules {
    fn num_rules(&self) -> usize {
        2
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        let (g1, g2) = avoidconf_indicators(factor, labels, self.top1[factor.anchor]);
        out[0] = g1;
        out[1] = g2;
    }
}

/// The rule sets selectable from a run configuration.
pub enum RuleImpl<'a> {
    Paris(ParisRules<'a>),
    AvoidConf(AvoidConfRules),
}

impl Rules for RuleImpl<'_> {
    fn num_rules(&self) -> usize {
        match self {
            RuleImpl::Paris(r) => r.num_rules(),
            RuleImpl::AvoidConf(r) => r.num_rules(),
        }
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        match self {
            RuleImpl::Paris(r) => r.indicators(factor, labels, out),
            RuleImpl::AvoidConf(r) => r.indicators(factor, labels, out),
        }
    }
}
