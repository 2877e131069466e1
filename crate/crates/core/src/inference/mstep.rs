use serde::{Deserialize, Serialize};

use super::PlScope;
use crate::compatibility::{CompatibilityModel, LabelView, RuleWeights, Rules};
use crate::error::{Error, Result};
use crate::kg::{AlignmentState, EntityId};
use crate::normalizer::{log_sum_exp, BeliefTable};
use crate::par;

struct PlEntry {
    log_gamma: f64,
    observed: usize,
    /// `G_κ(e')` for every candidate, row-major.
    features: Vec<Vec<f64>>,
}

/// The pseudo-likelihood of a fixed assignment. Features do not depend on the
/// weights, so they are computed once.
pub struct PlProblem {
    entries: Vec<PlEntry>,
    num_rules: usize,
}

impl PlProblem {
    /// Score every entity in `scope` at its label in `labels`. Labelled
    /// entities get their seed forced into the candidate list (replacing the
    /// last candidate if absent) and a full mass of 1.
    pub fn new<R: Rules>(
        model: &CompatibilityModel<R>,
        labels: &dyn LabelView,
        beliefs: &BeliefTable,
        seeds: &[(EntityId, EntityId)],
        scope: PlScope,
    ) -> Result<Self> {
        let state = AlignmentState::new(beliefs.len(), seeds);
        let entities: Vec<EntityId> = match scope {
            PlScope::All => (0..beliefs.len()).collect(),
            PlScope::Labelled => {
                let mut l: Vec<EntityId> = seeds.iter().map(|s| s.0).collect();
                l.sort_unstable();
                l
            }
        };
        let entries = par::map(entities.len(), |i| {
            let e = entities[i];
            let row = beliefs.row(e);
            let mut candidates = row.candidates.clone();
            let (observed, gamma) = match state.label(e) {
                Some(truth) => {
                    let pos = match candidates.iter().position(|&c| c == truth) {
                        Some(p) => p,
                        None if candidates.is_empty() => {
                            candidates.push(truth);
                            0
                        }
                        None => {
                            let last = candidates.len() - 1;
                            candidates[last] = truth;
                            last
                        }
                    };
                    (pos, 1.0)
                }
                None => {
                    let y = labels.label(e).ok_or(Error::Coverage(e))?;
                    let pos =
                        candidates
                            .iter()
                            .position(|&c| c == y)
                            .ok_or(Error::MissingTruth {
                                source_entity: e,
                                target: y,
                            })?;
                    (pos, row.gamma)
                }
            };
            Ok(PlEntry {
                log_gamma: gamma.ln(),
                observed,
                features: candidates
                    .iter()
                    .map(|&c| model.features(e, c, labels))
                    .collect(),
            })
        });
        Ok(Self {
            entries: entries.into_iter().collect::<Result<_>>()?,
            num_rules: model.num_rules(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn scores(weights: &RuleWeights, entry: &PlEntry) -> Vec<f64> {
        entry
            .features
            .iter()
            .map(|g| weights.phi.iter().zip(g).map(|(p, g)| p * g).sum())
            .collect()
    }

    /// `Σ_e log p̃(ŷ_e | ŷ_{MB^e})`.
    pub fn objective(&self, weights: &RuleWeights) -> f64 {
        self.entries
            .iter()
            .map(|en| {
                let s = Self::scores(weights, en);
                en.log_gamma + s[en.observed] - log_sum_exp(&s)
            })
            .sum()
    }

    /// Observed minus expected features, summed over entities.
    pub fn gradient(&self, weights: &RuleWeights) -> Vec<f64> {
        let mut grad = vec![0.0; self.num_rules];
        for en in &self.entries {
            let s = Self::scores(weights, en);
            let lse = log_sum_exp(&s);
            for (k, g) in grad.iter_mut().enumerate() {
                *g += en.features[en.observed][k];
                for (c, sc) in s.iter().enumerate() {
                    *g -= (sc - lse).exp() * en.features[c][k];
                }
            }
        }
        grad
    }
}

pub fn pl_objective<R: Rules>(
    model: &CompatibilityModel<R>,
    weights: &RuleWeights,
    labels: &dyn LabelView,
    beliefs: &BeliefTable,
    seeds: &[(EntityId, EntityId)],
    scope: PlScope,
) -> Result<f64> {
    Ok(PlProblem::new(model, labels, beliefs, seeds, scope)?.objective(weights))
}

pub fn pl_gradient<R: Rules>(
    model: &CompatibilityModel<R>,
    weights: &RuleWeights,
    labels: &dyn LabelView,
    beliefs: &BeliefTable,
    seeds: &[(EntityId, EntityId)],
    scope: PlScope,
) -> Result<Vec<f64>> {
    Ok(PlProblem::new(model, labels, beliefs, seeds, scope)?.gradient(weights))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStepFit {
    pub weights: RuleWeights,
    /// Mean objective before the first step and after every accepted step.
    pub trace: Vec<f64>,
}

/// Gradient ascent on the mean pseudo-likelihood. A step that lowers the
/// objective is retried at half the rate; a non-finite objective halves the
/// rate once and aborts the second time.
pub fn m_step(problem: &PlProblem, init: &RuleWeights, steps: usize, lr: f64) -> Result<MStepFit> {
    if !init.is_finite() {
        return Err(Error::Divergence("initial weights are not finite".into()));
    }
    if problem.is_empty() {
        return Ok(MStepFit {
            weights: init.clone(),
            trace: Vec::new(),
        });
    }
    let n = problem.len() as f64;
    let mut w = init.clone();
    let mut obj = problem.objective(&w) / n;
    if !obj.is_finite() {
        return Err(Error::Divergence(format!(
            "objective is {obj} at the initial weights"
        )));
    }
    let mut trace = vec![obj];
    let mut rate = lr;
    let mut blew_up = false;
    for _ in 0..steps {
        let grad = problem.gradient(&w);
        let mut accepted = false;
        for _ in 0..40 {
            let cand = RuleWeights {
                phi: w
                    .phi
                    .iter()
                    .zip(&grad)
                    .map(|(p, g)| p + rate * g / n)
                    .collect(),
                phi0: w.phi0,
            };
            let o = problem.objective(&cand) / n;
            if !o.is_finite() || !cand.is_finite() {
                if blew_up {
                    return Err(Error::Divergence(format!(
                        "objective is {o} after halving the rate"
                    )));
                }
                blew_up = true;
                rate *= 0.5;
                continue;
            }
            if o >= obj {
                w = cand;
                obj = o;
                accepted = true;
                break;
            }
            rate *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(obj);
    }
    Ok(MStepFit { weights: w, trace })
}
