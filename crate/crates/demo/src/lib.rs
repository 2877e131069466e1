//! WebAssembly bindings for the static demo page in `www/`. Every export
//! returns a JSON string.

use emea::compatibility::{
    AvoidConfRules, CompatibilityModel, FactorSubset, RuleSetKind, RuleWeights,
};
use emea::inference::{e_step, map_assignment, run_emea, EmeaConfig, LinkSets};
use emea::kg::{generate_synthetic_pair, SyntheticPairConfig};
use emea::normalizer::{normalize_row, BeliefRow, BeliefTable, NormalizerParams};
use emea::rng::phase_rng;
use emea::similarity::SimilarityRow;
use rand::seq::SliceRandom;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Out = Result<Value, String>;

fn to_js(v: Out) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

fn normalizer_curve(sims: &[f64], log_temp: f64, w_gap: f64, k: usize) -> Out {
    let params = NormalizerParams {
        log_temp,
        w_gap,
        ..NormalizerParams::default()
    };
    let row = normalize_row(&params, &SimilarityRow::Dense(sims.to_vec()), k)
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "temperature": params.temperature(),
        "candidates": row.candidates,
        "probs": row.probs,
        "gamma": row.gamma,
    }))
}

/// Softmax a similarity row and keep the top `k` targets.
#[wasm_bindgen]
pub fn normalize(sims: Vec<f64>, log_temp: f64, w_gap: f64, k: usize) -> Result<String, JsError> {
    to_js(normalizer_curve(&sims, log_temp, w_gap, k))
}

fn conflict_step(phi_match: f64, phi_unique: f64, p0: f64, p1: f64) -> Out {
    if !(0.0..=1.0).contains(&p0) || !(0.0..=1.0).contains(&p1) {
        return Err("probabilities must lie in [0, 1]".into());
    }
    let factors = (0..3)
        .map(|a| FactorSubset::new(a, vec![0, 1, 2], RuleSetKind::AvoidConf))
        .collect();
    let model = CompatibilityModel::new(
        3,
        factors,
        AvoidConfRules {
            top1: vec![Some(0), Some(0), Some(2)],
        },
    );
    let row = |c: Vec<usize>, p: f64| BeliefRow {
        candidates: c,
        probs: vec![p, 1.0 - p],
        gamma: 1.0,
    };
    let beliefs = BeliefTable {
        rows: vec![
            row(vec![0, 2], p0),
            row(vec![0, 1], p1),
            row(vec![2, 1], 0.7),
        ],
    };
    let weights = RuleWeights {
        phi: vec![phi_match, phi_unique],
        phi0: 0.0,
    };
    let q = e_step(&model, &beliefs, &weights, &[], false).map_err(|e| e.to_string())?;
    let before = map_assignment(&beliefs, &[])
        .map_err(|e| e.to_string())?
        .labels();
    let after = map_assignment(&q, &[]).map_err(|e| e.to_string())?.labels();
    let rows = |t: &BeliefTable| -> Vec<Value> {
        t.rows
            .iter()
            .map(|r| json!({"candidates": r.candidates, "probs": r.probs}))
            .collect()
    };
    Ok(json!({
        "before": {"assignment": before, "rows": rows(&beliefs)},
        "after": {"assignment": after, "rows": rows(&q)},
    }))
}

/// One E-step on three entities where two share a neural top-1 target.
#[wasm_bindgen]
pub fn conflict_e_step(
    phi_match: f64,
    phi_unique: f64,
    p0: f64,
    p1: f64,
) -> Result<String, JsError> {
    to_js(conflict_step(phi_match, phi_unique, p0, p1))
}

fn synthetic_run(entities: usize, iterations: usize, seed: u64) -> Out {
    let pair = generate_synthetic_pair(&SyntheticPairConfig {
        entity_count: entities,
        relation_count: 10,
        mean_degree: 4.0,
        edge_dropout: 0.2,
        relation_rename: false,
        rng_seed: seed,
    })
    .map_err(|e| e.to_string())?;
    let mut links = pair.truth.clone();
    links.shuffle(&mut phase_rng(seed, "split"));
    let n_seed = ((0.05 * links.len() as f64).round() as usize).max(1);
    let n_valid = (links.len() / 10).clamp(1, 100);
    if n_seed + n_valid >= links.len() {
        return Err("graph too small to split".into());
    }
    let sets = LinkSets {
        valid: links[n_seed..n_seed + n_valid].to_vec(),
        test: links[n_seed + n_valid..].to_vec(),
    };
    let mut cfg = EmeaConfig::default();
    cfg.encoder.dim = 32;
    cfg.encoder.epochs = 100;
    cfg.encoder.retrain_epochs = 30;
    cfg.em.iterations = iterations;
    cfg.em.rng_seed = seed;
    let run = run_emea(&pair.source, &pair.target, &links[..n_seed], &sets, &cfg)
        .map_err(|e| e.to_string())?;
    let history: Vec<Value> = run
        .history
        .iter()
        .map(|r| {
            json!({
                "iteration": r.iteration,
                "hit1": r.neural_test.map(|m| m.hit1),
                "mrr": r.neural_test.map(|m| m.mrr),
                "conflict_rate": r.conflict_rate,
                "paris": r.paris_compatibility,
                "phi": r.weights.phi,
            })
        })
        .collect();
    Ok(json!({"seeds": n_seed, "test": sets.test.len(), "history": history}))
}

/// Generate a synthetic pair and align it, returning per-iteration metrics.
#[wasm_bindgen]
pub fn run_synthetic(entities: usize, iterations: usize, seed: u32) -> Result<String, JsError> {
    to_js(synthetic_run(entities, iterations, seed as u64))
}
