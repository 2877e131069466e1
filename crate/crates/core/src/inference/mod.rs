//! Variational EM: E-step, pseudo-likelihood M-step and the outer loop.

mod driver;
mod estep;
mod mstep;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compatibility::RuleSetKind;
use crate::error::{Error, Result};
use crate::kg::{AlignmentState, EntityId};
use crate::normalizer::{BeliefRow, BeliefTable};

pub use driver::{run_emea, EmRunState, EmeaConfig, IterationRecord, LinkSets, PhaseTiming};
pub use estep::e_step;
pub use mstep::{m_step, pl_gradient, pl_objective, MStepFit, PlProblem};

/// Which entities the pseudo-likelihood sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlScope {
    All,
    Labelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    /// Candidates per entity.
    pub k: usize,
    /// Neighbourhood size of conflict-avoidance factors.
    pub n: usize,
    pub iterations: usize,
    pub pl_scope: PlScope,
    pub m_step_steps: usize,
    pub m_step_lr: f64,
    /// Iterations without a validation Hit@1 gain before stopping.
    pub patience: usize,
    pub rules: RuleSetKind,
    /// Read neighbour matches from beliefs instead of point labels.
    pub paris_soft: bool,
    /// Sample pseudo-labels from `q*` instead of taking the argmax.
    pub sample_pseudo_labels: bool,
    pub retrain_from_scratch: bool,
    pub normalizer_steps: usize,
    pub normalizer_lr: f64,
    pub rng_seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k: 10,
            n: 5,
            iterations: 5,
            pl_scope: PlScope::All,
            m_step_steps: 100,
            m_step_lr: 0.1,
            patience: 2,
            rules: RuleSetKind::Paris,
            paris_soft: false,
            sample_pseudo_labels: false,
            retrain_from_scratch: false,
            normalizer_steps: 100,
            normalizer_lr: 0.1,
            rng_seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::Config("k and n must be positive".into()));
        }
        if !(self.m_step_lr > 0.0 && self.m_step_lr.is_finite()) {
            return Err(Error::Config("m_step_lr must be positive".into()));
        }
        if !(self.normalizer_lr >= 0.0 && self.normalizer_lr.is_finite()) {
            return Err(Error::Config("normalizer_lr must be non-negative".into()));
        }
        Ok(())
    }
}

/// Point assignment `ŷ`: seeds for labelled entities, the most probable
/// candidate (ties to the lower id) for the rest.
pub fn map_assignment(
    beliefs: &BeliefTable,
    seeds: &[(EntityId, EntityId)],
) -> Result<AlignmentState> {
    let mut state = AlignmentState::new(beliefs.len(), seeds);
    for u in 0..beliefs.len() {
        if state.is_labelled(u) {
            continue;
        }
        let t = beliefs.row(u).argmax().ok_or(Error::Coverage(u))?;
        state.assign(u, t);
    }
    Ok(state)
}

/// First candidate of maximal probability, so exact ties keep the neural order.
fn first_max(row: &BeliefRow) -> Option<EntityId> {
    let mut best: Option<(EntityId, f64)> = None;
    for (&c, &p) in row.candidates.iter().zip(&row.probs) {
        if best.is_none_or(|b| p > b.1) {
            best = Some((c, p));
        }
    }
    best.map(|b| b.0)
}

fn sample(row: &BeliefRow, rng: &mut impl Rng) -> Option<EntityId> {
    let total: f64 = row.probs.iter().sum();
    if row.candidates.is_empty() || total.is_nan() || total <= 0.0 {
        return row.candidates.first().copied();
    }
    let mut x = rng.gen::<f64>() * total;
    for (&c, &p) in row.candidates.iter().zip(&row.probs) {
        if x < p {
            return Some(c);
        }
        x -= p;
    }
    row.candidates.last().copied()
}

/// One training link per source entity: seeds for `L`, and for `U` the argmax
/// of `q*` (or a draw from it when `rng` is given). Sorted by source.
pub fn pseudo_label<G: Rng>(
    qstar: &BeliefTable,
    seeds: &[(EntityId, EntityId)],
    mut rng: Option<&mut G>,
) -> Result<Vec<(EntityId, EntityId)>> {
    let state = AlignmentState::new(qstar.len(), seeds);
    let mut out = Vec::with_capacity(qstar.len());
    for e in 0..qstar.len() {
        let t = match state.label(e) {
            Some(t) => t,
            None => {
                let row = qstar.row(e);
                match rng.as_deref_mut() {
                    Some(r) => sample(row, r),
                    None => first_max(row),
                }
                .ok_or(Error::Coverage(e))?
            }
        };
        out.push((e, t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::phase_rng;
    use rand_chacha::ChaCha8Rng;

    fn row(c: Vec<EntityId>, p: Vec<f64>) -> BeliefRow {
        let gamma = p.iter().sum();
        BeliefRow {
            candidates: c,
            probs: p,
            gamma,
        }
    }

    fn table() -> BeliefTable {
        BeliefTable {
            rows: vec![
                row(vec![3, 1], vec![0.6, 0.4]),
                row(vec![4, 2], vec![0.5, 0.5]),
                row(vec![0, 1], vec![0.1, 0.8]),
            ],
        }
    }

    #[test]
    fn map_assignment_rules() {
        let s = map_assignment(&table(), &[(2, 4)]).unwrap();
        assert_eq!(s.labels(), vec![Some(3), Some(2), Some(4)]);
        let empty = BeliefTable {
            rows: vec![row(vec![], vec![])],
        };
        assert!(matches!(
            map_assignment(&empty, &[]),
            Err(Error::Coverage(0))
        ));
    }

    #[test]
    fn pseudo_labels_total_and_keep_neural_order_on_ties() {
        let pl = pseudo_label::<ChaCha8Rng>(&table(), &[(2, 4)], None).unwrap();
        assert_eq!(pl, vec![(0, 3), (1, 4), (2, 4)]);
        let mut rng = phase_rng(1, "t");
        let drawn = pseudo_label(&table(), &[], Some(&mut rng)).unwrap();
        assert_eq!(drawn.len(), 3);
        for (e, t) in drawn {
            assert!(table().row(e).candidates.contains(&t));
        }
    }

    #[test]
    fn config_validation() {
        assert!(EmConfig::default().validate().is_ok());
        let bad = EmConfig {
            k: 0,
            ..EmConfig::default()
        };
        assert!(bad.validate().is_err());
        let parsed: EmConfig =
            serde_json::from_str(r#"{"pl_scope":"labelled","rules":"avoidconf"}"#).unwrap();
        assert_eq!(parsed.pl_scope, PlScope::Labelled);
        assert!(serde_json::from_str::<EmConfig>(r#"{"bogus":1}"#).is_err());
    }
}
