//! Exact enumeration over tiny instances, used to check the Markov-blanket
//! conditional.

use super::{CompatibilityModel, RuleWeights, Rules};
use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::normalizer::log_sum_exp;

/// Largest joint state space the oracle will enumerate.
pub const STATE_SPACE_GUARD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `p(y_e = t | y_{-e})` for every target `t`.
    pub conditional: Vec<f64>,
    /// `log z` of the joint over the latent entities.
    pub log_partition: f64,
}

/// Enumerate every joint assignment of `latent ∪ {e}` over all `num_target`
/// targets, with the remaining entities fixed at `labels`, and condition on
/// the other latent labels as given in `labels`.
pub fn brute_force_conditional<R: Rules>(
    model: &CompatibilityModel<R>,
    weights: &RuleWeights,
    num_target: usize,
    latent: &[EntityId],
    labels: &[Option<EntityId>],
    e: EntityId,
) -> Result<OracleResult> {
    let mut vars: Vec<EntityId> = latent.to_vec();
    if !vars.contains(&e) {
        vars.push(e);
    }
    vars.sort_unstable();
    vars.dedup();
    let space = (num_target as f64).powi(vars.len() as i32);
    if space > STATE_SPACE_GUARD {
        return Err(Error::OracleTooLarge(space));
    }
    if num_target == 0 {
        return Err(Error::Input("no target entities".into()));
    }

    let mut y = labels.to_vec();
    let mut digits = vec![0usize; vars.len()];
    let mut joint = Vec::with_capacity(space as usize);
    let mut matching = vec![f64::NEG_INFINITY; num_target];
    loop {
        for (v, &d) in vars.iter().zip(&digits) {
            y[*v] = Some(d);
        }
        let lp = model.log_potential(weights, &y);
        joint.push(lp);
        let agrees = vars
            .iter()
            .zip(&digits)
            .all(|(&v, &d)| v == e || labels[v] == Some(d));
        if agrees {
            matching[y[e].unwrap()] = lp;
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == digits.len() {
                let log_partition = log_sum_exp(&joint);
                let lse = log_sum_exp(&matching);
                return Ok(OracleResult {
                    conditional: matching.iter().map(|m| (m - lse).exp()).collect(),
                    log_partition,
                });
            }
            digits[i] += 1;
            if digits[i] < num_target {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
