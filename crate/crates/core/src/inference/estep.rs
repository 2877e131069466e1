use super::map_assignment;
use crate::compatibility::{CompatibilityModel, LabelView, RuleWeights, Rules, SoftLabels};
use crate::error::Result;
use crate::kg::EntityId;
use crate::normalizer::{BeliefRow, BeliefTable};
use crate::par;

/// One block update of `q*`: every unlabelled row becomes the model
/// conditional over its candidates given `ŷ = map_assignment(beliefs)`.
/// All rows read the same old assignment. Labelled rows become point masses.
///
/// With `soft`, neighbour matches are weighted by `beliefs` rather than read
/// off `ŷ`.
pub fn e_step<R: Rules>(
    model: &CompatibilityModel<R>,
    beliefs: &BeliefTable,
    weights: &RuleWeights,
    seeds: &[(EntityId, EntityId)],
    soft: bool,
) -> Result<BeliefTable> {
    let state = map_assignment(beliefs, seeds)?;
    let labels = state.labels();
    let mut pinned = beliefs.clone();
    pinned.pin_labelled(seeds);
    let soft_view = SoftLabels {
        labels: &labels,
        beliefs: &pinned,
    };
    let view: &dyn LabelView = if soft { &soft_view } else { &labels };
    let rows = par::map(beliefs.len(), |u| {
        if state.is_labelled(u) {
            return pinned.rows[u].clone();
        }
        let row = beliefs.row(u);
        BeliefRow {
            candidates: row.candidates.clone(),
            probs: model.conditional(u, weights, &row.candidates, row.gamma, view),
            gamma: row.gamma,
        }
    });
    Ok(BeliefTable { rows })
}
