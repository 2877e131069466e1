//! Factor-graph compatibility model.
//!
//! A collection of factor subsets `F ⊆ E` carries rule indicators `g_κ(y_F)`;
//! each subset contributes the local function
//! `l(y_F) = exp(Σ_κ φ_κ g_κ(y_F) + φ0)` and the joint is their normalized
//! product. Inference never touches the partition function: the conditional
//! of one label given all others only involves the factors that contain it,
//! i.e. its Markov blanket.

mod factors;
mod model;
pub mod oracle;
mod rules;

use serde::{Deserialize, Serialize};

use crate::kg::EntityId;
use crate::normalizer::BeliefTable;

pub use factors::{build_avoidconf_factors, build_paris_factors};
pub use model::{local_compatibility, CompatibilityModel};
pub use rules::{
    avoidconf_indicators, paris_indicator, AvoidConfRules, ParisRules, RuleImpl, Rules,
};

/// Upper clamp for indicator values.
pub const INDICATOR_CEILING: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleSetKind {
    Paris,
    #[serde(rename = "avoidconf")]
    AvoidConf,
}

impl RuleSetKind {
    pub fn rule_names(self) -> &'static [&'static str] {
        match self {
            RuleSetKind::Paris => &["paris"],
            RuleSetKind::AvoidConf => &["eq_neu", "one2one"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSubset {
    pub anchor: EntityId,
    /// Ascending, includes the anchor.
    pub members: Vec<EntityId>,
    pub rule_set: RuleSetKind,
}

impl FactorSubset {
    pub fn new(anchor: EntityId, mut members: Vec<EntityId>, rule_set: RuleSetKind) -> Self {
        members.push(anchor);
        members.sort_unstable();
        members.dedup();
        Self {
            anchor,
            members,
            rule_set,
        }
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.members.binary_search(&e).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleWeights {
    pub phi: Vec<f64>,
    pub phi0: f64,
}

impl RuleWeights {
    pub fn zeros(num_rules: usize) -> Self {
        Self {
            phi: vec![0.0; num_rules],
            phi0: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi0.is_finite() && self.phi.iter().all(|p| p.is_finite())
    }
}

/// Read access to the current labels of source entities.
pub trait LabelView: Sync {
    fn label(&self, e: EntityId) -> Option<EntityId>;

    /// Probability mass that `e` maps to `t`; the indicator for point labels.
    fn prob(&self, e: EntityId, t: EntityId) -> f64 {
        match self.label(e) {
            Some(l) if l == t => 1.0,
            _ => 0.0,
        }
    }
}

impl LabelView for [Option<EntityId>] {
    fn label(&self, e: EntityId) -> Option<EntityId> {
        self.get(e).copied().flatten()
    }
}

impl LabelView for Vec<Option<EntityId>> {
    fn label(&self, e: EntityId) -> Option<EntityId> {
        self.as_slice().label(e)
    }
}

/// `base` with one entity's label replaced.
pub struct Override<'a, L: ?Sized> {
    pub base: &'a L,
    pub entity: EntityId,
    pub target: EntityId,
}

impl<L: LabelView + ?Sized> LabelView for Override<'_, L> {
    fn label(&self, e: EntityId) -> Option<EntityId> {
        if e == self.entity {
            Some(self.target)
        } else {
            self.base.label(e)
        }
    }

    fn prob(&self, e: EntityId, t: EntityId) -> f64 {
        if e == self.entity {
            if t == self.target {
                1.0
            } else {
                0.0
            }
        } else {
            self.base.prob(e, t)
        }
    }
}

/// Point labels for `label`, but neighbour probabilities read from beliefs.
/// Used by the soft PARIS mode.
pub struct SoftLabels<'a> {
    pub labels: &'a [Option<EntityId>],
    pub beliefs: &'a BeliefTable,
}

impl LabelView for SoftLabels<'_> {
    fn label(&self, e: EntityId) -> Option<EntityId> {
        self.labels.label(e)
    }

    fn prob(&self, e: EntityId, t: EntityId) -> f64 {
        self.beliefs.row(e).prob(t)
    }
}
