use serde::{Deserialize, Serialize};

use super::{e_step, m_step, map_assignment, pseudo_label, EmConfig, PlProblem};
use crate::compatibility::{
    build_avoidconf_factors, build_paris_factors, AvoidConfRules, CompatibilityModel, LabelView,
    ParisRules, RuleImpl, RuleSetKind, RuleWeights, SoftLabels,
};
use crate::error::{Error, Result};
use crate::eval::{
    belief_metrics, compatibility_profile, conflict_rate, ranking_metrics, MetricReport,
};
use crate::kg::{AlignmentState, EntityId, KnowledgeGraph};
use crate::normalizer::{
    build_belief_table, fit_normalizer, BeliefTable, LabelledRow, NormalizerParams,
};
use crate::rng::{phase_rng, phase_seed};
use crate::similarity::{
    fine_tune, train_baseline_encoder, EmbeddingTable, EncoderConfig, SimilarityRow,
};
use crate::stats::relation_stats;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmeaConfig {
    pub encoder: EncoderConfig,
    pub normalizer: NormalizerParams,
    pub em: EmConfig,
}

/// Held-out links. Early stopping reads `valid`; `test` is only reported.
#[derive(Debug, Clone, Default)]
pub struct LinkSets {
    pub valid: Vec<(EntityId, EntityId)>,
    pub test: Vec<(EntityId, EntityId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Neural module `q_Θ` after this iteration's retraining.
    pub neural_valid: MetricReport,
    pub neural_test: Option<MetricReport>,
    /// Compatibility module `q*` of this iteration; absent at iteration 0.
    pub compat_valid: Option<MetricReport>,
    pub compat_test: Option<MetricReport>,
    pub weights: RuleWeights,
    pub normalizer: NormalizerParams,
    /// Mean pseudo-likelihood at the fitted weights.
    pub pl_objective: Option<f64>,
    /// Over the neural point assignment.
    pub conflict_rate: f64,
    pub paris_compatibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub iteration: usize,
    pub phase: String,
    pub seconds: f64,
}

pub struct EmRunState {
    pub iteration: usize,
    pub embeddings: EmbeddingTable,
    pub normalizer: NormalizerParams,
    /// Neural candidate distributions `q_Θ`.
    pub beliefs: BeliefTable,
    pub qstar: Option<BeliefTable>,
    pub weights: RuleWeights,
    pub state: AlignmentState,
    pub history: Vec<IterationRecord>,
    pub timings: Vec<PhaseTiming>,
    pub stopped_early: bool,
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Clock {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

fn fit_and_normalize(
    emb: &EmbeddingTable,
    seeds: &[(EntityId, EntityId)],
    init: NormalizerParams,
    em: &EmConfig,
) -> Result<(NormalizerParams, BeliefTable)> {
    let rows: Vec<LabelledRow> = seeds
        .iter()
        .map(|&(s, t)| LabelledRow {
            row: SimilarityRow::Dense(emb.similarity_row(s)),
            truth: t,
        })
        .collect();
    let params = fit_normalizer(init, &rows, em.normalizer_steps, em.normalizer_lr)?.params;
    let beliefs = build_belief_table(&params, emb, em.k)?;
    Ok((params, beliefs))
}

fn check_links(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    seeds: &[(EntityId, EntityId)],
    links: &LinkSets,
) -> Result<()> {
    let mut seen = vec![false; source.num_entities()];
    for &(s, t) in seeds.iter().chain(&links.valid) {
        if s >= source.num_entities() || t >= target.num_entities() {
            return Err(Error::Input(format!("link ({s}, {t}) is out of range")));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::Input(format!(
                "source entity {} appears twice across seeds and validation links",
                source.entities().label(s)
            )));
        }
    }
    if links.valid.is_empty() {
        return Err(Error::Config("validation links are empty".into()));
    }
    Ok(())
}

struct Snapshot {
    neural_valid: MetricReport,
    neural_test: Option<MetricReport>,
    conflict_rate: f64,
    paris_compatibility: f64,
    state: AlignmentState,
}

fn snapshot(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    emb: &EmbeddingTable,
    beliefs: &BeliefTable,
    seeds: &[(EntityId, EntityId)],
    links: &LinkSets,
) -> Result<Snapshot> {
    let state = map_assignment(beliefs, seeds)?;
    let stats = relation_stats(source, target, &state.labels());
    let profile = compatibility_profile(&state, &stats, source, target);
    Ok(Snapshot {
        neural_valid: ranking_metrics(emb, &links.valid)?,
        neural_test: if links.test.is_empty() {
            None
        } else {
            Some(ranking_metrics(emb, &links.test)?)
        },
        conflict_rate: conflict_rate(&state),
        paris_compatibility: profile.mean,
        state,
    })
}

/// Train the encoder on the seeds, then alternate M-step, E-step, pseudo-
/// labelling and encoder retraining for up to `em.iterations` rounds.
pub fn run_emea(
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    seeds: &[(EntityId, EntityId)],
    links: &LinkSets,
    config: &EmeaConfig,
) -> Result<EmRunState> {
    let em = &config.em;
    em.validate()?;
    check_links(source, target, seeds, links)?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed link is required".into()));
    }
    let root = em.rng_seed;
    let mut timings = Vec::new();
    let mut time = |iteration: usize, phase: &str, clock: Clock| {
        timings.push(PhaseTiming {
            iteration,
            phase: phase.to_owned(),
            seconds: clock.seconds(),
        })
    };

    let mut enc = config.encoder.clone();
    enc.rng_seed = phase_seed(root, "encoder");
    let clock = Clock::start();
    let (mut emb, _) = train_baseline_encoder(source, target, seeds, &enc, &[])?;
    time(0, "encoder", clock);
    let clock = Clock::start();
    let (mut params, mut beliefs) = fit_and_normalize(&emb, seeds, config.normalizer, em)?;
    time(0, "normalize", clock);

    let snap = snapshot(source, target, &emb, &beliefs, seeds, links)?;
    let num_rules = em.rules.rule_names().len();
    let mut weights = RuleWeights::zeros(num_rules);
    let mut history = vec![IterationRecord {
        iteration: 0,
        neural_valid: snap.neural_valid,
        neural_test: snap.neural_test,
        compat_valid: None,
        compat_test: None,
        weights: weights.clone(),
        normalizer: params,
        pl_objective: None,
        conflict_rate: snap.conflict_rate,
        paris_compatibility: snap.paris_compatibility,
    }];
    let mut state = snap.state;
    let mut best = snap.neural_valid.hit1;
    let mut stale = 0;
    let mut qstar = None;
    let mut stopped_early = false;
    let mut iteration = 0;

    let paris_factors = match em.rules {
        RuleSetKind::Paris => build_paris_factors(source),
        RuleSetKind::AvoidConf => Vec::new(),
    };

    for it in 1..=em.iterations {
        iteration = it;
        let labels = state.labels();
        let stats = relation_stats(source, target, &labels);
        let rules = match em.rules {
            RuleSetKind::Paris => RuleImpl::Paris(ParisRules {
                source,
                target,
                stats: &stats,
            }),
            RuleSetKind::AvoidConf => RuleImpl::AvoidConf(AvoidConfRules {
                top1: beliefs
                    .rows
                    .iter()
                    .map(|r| r.candidates.first().copied())
                    .collect(),
            }),
        };
        let factors = match em.rules {
            RuleSetKind::Paris => paris_factors.clone(),
            RuleSetKind::AvoidConf => build_avoidconf_factors(&emb, em.n),
        };
        let model = CompatibilityModel::new(source.num_entities(), factors, rules);

        let clock = Clock::start();
        let mut pinned = beliefs.clone();
        pinned.pin_labelled(seeds);
        let soft = SoftLabels {
            labels: &labels,
            beliefs: &pinned,
        };
        let view: &dyn LabelView = if em.paris_soft { &soft } else { &labels };
        let problem = PlProblem::new(&model, view, &beliefs, seeds, em.pl_scope)?;
        let fit = m_step(&problem, &weights, em.m_step_steps, em.m_step_lr)?;
        weights = fit.weights;
        time(it, "m_step", clock);

        let clock = Clock::start();
        let q = e_step(&model, &beliefs, &weights, seeds, em.paris_soft)?;
        time(it, "e_step", clock);
        let compat_valid = belief_metrics(&q, &links.valid)?;
        let compat_test = if links.test.is_empty() {
            None
        } else {
            Some(belief_metrics(&q, &links.test)?)
        };

        let mut rng = phase_rng(root, &format!("pseudo-label-{it}"));
        let pseudo = pseudo_label(&q, seeds, em.sample_pseudo_labels.then_some(&mut rng))?;
        let extra: Vec<(EntityId, EntityId)> = pseudo
            .into_iter()
            .filter(|&(e, _)| !state.is_labelled(e))
            .collect();

        let clock = Clock::start();
        if em.retrain_from_scratch {
            let mut enc = config.encoder.clone();
            enc.rng_seed = phase_seed(root, &format!("encoder-{it}"));
            emb = train_baseline_encoder(source, target, seeds, &enc, &extra)?.0;
        } else {
            fine_tune(
                &mut emb,
                source,
                target,
                seeds,
                &extra,
                &config.encoder,
                config.encoder.retrain_epochs,
                phase_rng(root, &format!("retrain-{it}")),
            )?;
        }
        time(it, "encoder", clock);
        let clock = Clock::start();
        (params, beliefs) = fit_and_normalize(&emb, seeds, params, em)?;
        time(it, "normalize", clock);

        let snap = snapshot(source, target, &emb, &beliefs, seeds, links)?;
        history.push(IterationRecord {
            iteration: it,
            neural_valid: snap.neural_valid,
            neural_test: snap.neural_test,
            compat_valid: Some(compat_valid),
            compat_test,
            weights: weights.clone(),
            normalizer: params,
            pl_objective: fit.trace.last().copied(),
            conflict_rate: snap.conflict_rate,
            paris_compatibility: snap.paris_compatibility,
        });
        state = snap.state;
        qstar = Some(q);

        if snap.neural_valid.hit1 > best {
            best = snap.neural_valid.hit1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= em.patience && it < em.iterations {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(EmRunState {
        iteration,
        embeddings: emb,
        normalizer: params,
        beliefs,
        qstar,
        weights,
        state,
        history,
        timings,
        stopped_early,
    })
}
