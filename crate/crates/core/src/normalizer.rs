//! Similarity → probability normalization.
//!
//! Each target `e'` of a source `e` gets the feature score
//! `f(e,e') = ω1·s(e,e') + ω2·d(e,e') + ω0`, with the gap-to-best feature
//! `d(e,e') = max s(e,·) − s(e,e')`, and the row is pushed through a softmax at
//! temperature `τ = exp(ρ)`. The full row is normalized first; the stored
//! belief keeps only the top-K candidates together with their retained mass γ.
//!
//! Since `d` is an affine function of `s` within a row, only `(ω1 − ω2)/τ`
//! affects the distribution, and `ω0` never does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::par;
use crate::similarity::{rank_order, SimilarityRow, SimilaritySource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizerParams {
    /// ω1
    pub w_sim: f64,
    /// ω2
    pub w_gap: f64,
    /// ω0
    pub bias: f64,
    /// ρ, with τ = exp(ρ)
    pub log_temp: f64,
}

impl Default for NormalizerParams {
    fn default() -> Self {
        Self {
            w_sim: 1.0,
            w_gap: -1.0,
            bias: 0.0,
            log_temp: 0.0,
        }
    }
}

impl NormalizerParams {
    pub fn temperature(&self) -> f64 {
        self.log_temp.exp()
    }

    fn to_array(self) -> [f64; 4] {
        [self.w_sim, self.w_gap, self.bias, self.log_temp]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            w_sim: a[0],
            w_gap: a[1],
            bias: a[2],
            log_temp: a[3],
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Candidate distribution of one source entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefRow {
    /// `C_e`, in candidate order.
    pub candidates: Vec<EntityId>,
    pub probs: Vec<f64>,
    /// Mass of the untruncated distribution that falls on `C_e`.
    pub gamma: f64,
}

impl BeliefRow {
    pub fn point_mass(target: EntityId) -> Self {
        Self {
            candidates: vec![target],
            probs: vec![1.0],
            gamma: 1.0,
        }
    }

    /// Highest probability; exact ties go to the lower target id.
    pub fn argmax(&self) -> Option<EntityId> {
        self.candidates
            .iter()
            .zip(&self.probs)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| *c)
    }

    pub fn prob(&self, target: EntityId) -> f64 {
        self.candidates
            .iter()
            .position(|&c| c == target)
            .map_or(0.0, |i| self.probs[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefTable {
    pub rows: Vec<BeliefRow>,
}

impl BeliefTable {
    pub fn row(&self, e: EntityId) -> &BeliefRow {
        &self.rows[e]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Replace the rows of labelled entities with point masses on their seeds.
    pub fn pin_labelled(&mut self, seeds: &[(EntityId, EntityId)]) {
        for &(s, t) in seeds {
            self.rows[s] = BeliefRow::point_mass(t);
        }
    }
}

fn check_finite(entries: &[(EntityId, f64)]) -> Result<()> {
    match entries.iter().find(|(_, s)| !s.is_finite()) {
        Some((t, s)) => Err(Error::Input(format!(
            "similarity to target {t} is not finite ({s})"
        ))),
        None => Ok(()),
    }
}

/// Log-probabilities over `entries` (full softmax of `f/τ`).
fn log_probs(params: &NormalizerParams, entries: &[(EntityId, f64)]) -> Vec<f64> {
    let max = entries
        .iter()
        .map(|e| e.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let tau = params.temperature();
    let z: Vec<f64> = entries
        .iter()
        .map(|&(_, s)| (params.w_sim * s + params.w_gap * (max - s) + params.bias) / tau)
        .collect();
    let lse = log_sum_exp(&z);
    z.into_iter().map(|z| z - lse).collect()
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Probabilities over every entry of the row, in entry order.
pub fn row_distribution(
    params: &NormalizerParams,
    row: &SimilarityRow,
) -> Result<Vec<(EntityId, f64)>> {
    let entries = row.entries();
    if entries.is_empty() {
        return Err(Error::Input("empty similarity row".into()));
    }
    check_finite(&entries)?;
    let lp = log_probs(params, &entries);
    Ok(entries
        .iter()
        .zip(lp)
        .map(|(&(t, _), l)| (t, l.exp()))
        .collect())
}

/// Normalize a full row and keep the top-`k` targets by raw similarity.
pub fn normalize_row(
    params: &NormalizerParams,
    row: &SimilarityRow,
    k: usize,
) -> Result<BeliefRow> {
    let entries = row.entries();
    if entries.is_empty() {
        return Err(Error::Input("empty similarity row".into()));
    }
    check_finite(&entries)?;
    let lp = log_probs(params, &entries);
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| rank_order(&entries[a], &entries[b]));
    order.truncate(k.max(1));
    let candidates: Vec<EntityId> = order.iter().map(|&i| entries[i].0).collect();
    let probs: Vec<f64> = order.iter().map(|&i| lp[i].exp()).collect();
    // kept strictly positive even when every retained probability underflows
    let gamma = probs.iter().sum::<f64>().clamp(f64::MIN_POSITIVE, 1.0);
    Ok(BeliefRow {
        candidates,
        probs,
        gamma,
    })
}

pub fn build_belief_table<S: SimilaritySource + ?Sized>(
    params: &NormalizerParams,
    sims: &S,
    k: usize,
) -> Result<BeliefTable> {
    let rows = par::map(sims.num_source(), |e| {
        normalize_row(params, &sims.row(e), k)
    });
    Ok(BeliefTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// A labelled training row: similarities of one seed source and its true target.
#[derive(Debug, Clone)]
pub struct LabelledRow {
    pub row: SimilarityRow,
    pub truth: EntityId,
}

/// Cross-entropy `−Σ log Pr(y_e = ŷ_e)` and its gradient over `(ω1, ω2, ω0, ρ)`.
pub fn normalizer_loss(params: &NormalizerParams, rows: &[LabelledRow]) -> Result<(f64, [f64; 4])> {
    let tau = params.temperature();
    let mut loss = 0.0;
    let mut grad = [0.0; 4];
    for (i, lr) in rows.iter().enumerate() {
        let entries = lr.row.entries();
        check_finite(&entries)?;
        let t = entries
            .iter()
            .position(|&(id, _)| id == lr.truth)
            .ok_or(Error::MissingTruth {
                source_entity: i,
                target: lr.truth,
            })?;
        let lp = log_probs(params, &entries);
        loss -= lp[t];
        let max = entries
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        for (j, (&(_, s), l)) in entries.iter().zip(&lp).enumerate() {
            let coef = l.exp() - if j == t { 1.0 } else { 0.0 };
            let d = max - s;
            let f = params.w_sim * s + params.w_gap * d + params.bias;
            grad[0] += coef * s / tau;
            grad[1] += coef * d / tau;
            grad[2] += coef / tau;
            grad[3] -= coef * f / tau;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerFit {
    pub params: NormalizerParams,
    /// Loss before the first step and after every accepted step.
    pub trace: Vec<f64>,
}

/// Gradient descent on the mean cross-entropy with step rejection: a step that
/// raises the loss is retried at half the rate.
pub fn fit_normalizer(
    init: NormalizerParams,
    rows: &[LabelledRow],
    steps: usize,
    lr: f64,
) -> Result<NormalizerFit> {
    if rows.is_empty() {
        return Err(Error::Config("normalizer fit needs labelled rows".into()));
    }
    if !init.is_finite() {
        return Err(Error::Config("normalizer parameters must be finite".into()));
    }
    let n = rows.len() as f64;
    let mut params = init;
    let (mut loss, mut grad) = normalizer_loss(&params, rows)?;
    let mut trace = vec![loss];
    let mut rate = lr;
    for _ in 0..steps {
        if rate <= 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = params.to_array();
            for (x, g) in a.iter_mut().zip(&grad) {
                *x -= rate * g / n;
            }
            let cand = NormalizerParams::from_array(a);
            let (l, g) = normalizer_loss(&cand, rows)?;
            if l.is_finite() && l <= loss {
                params = cand;
                loss = l;
                grad = g;
                accepted = true;
                break;
            }
            rate *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(loss);
    }
    Ok(NormalizerFit { params, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn plain() -> NormalizerParams {
        NormalizerParams {
            w_sim: 1.0,
            w_gap: 0.0,
            bias: 0.0,
            log_temp: 0.0,
        }
    }

    #[test]
    fn constant_row_is_uniform() {
        let row = SimilarityRow::Dense(vec![0.3; 8]);
        let b = normalize_row(&plain(), &row, 3).unwrap();
        for p in &b.probs {
            assert_abs_diff_eq!(*p, 1.0 / 8.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(b.gamma, 3.0 / 8.0, epsilon = 1e-15);
        assert_eq!(b.candidates, vec![0, 1, 2]);
    }

    #[test]
    fn two_element_closed_form() {
        let b = normalize_row(&plain(), &SimilarityRow::Dense(vec![1.0, 0.0]), 2).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(b.probs[0], e / (e + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(b.probs[1], 1.0 / (e + 1.0), epsilon = 1e-12);
        assert_abs_diff_eq!(b.probs[0], 0.7311, epsilon = 1e-4);
    }

    #[test]
    fn non_finite_rejected() {
        let row = SimilarityRow::Dense(vec![0.1, f64::NAN]);
        assert!(matches!(
            normalize_row(&plain(), &row, 1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn temperature_extremes() {
        let row = SimilarityRow::Dense(vec![0.9, 0.2, -0.4, 0.5]);
        let hot = NormalizerParams {
            log_temp: 20.0,
            ..plain()
        };
        for (_, p) in row_distribution(&hot, &row).unwrap() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-6);
        }
        let cold = NormalizerParams {
            log_temp: -20.0,
            ..plain()
        };
        let d = row_distribution(&cold, &row).unwrap();
        assert!(d[0].1 >= 1.0 - 1e-6);
    }

    #[test]
    fn missing_truth_is_data_error() {
        let rows = vec![LabelledRow {
            row: SimilarityRow::Sparse(vec![(0, 0.2)]),
            truth: 3,
        }];
        assert!(matches!(
            fit_normalizer(NormalizerParams::default(), &rows, 5, 0.1),
            Err(Error::MissingTruth { .. })
        ));
    }

    #[test]
    fn zero_rate_is_noop() {
        let rows = vec![LabelledRow {
            row: SimilarityRow::Dense(vec![0.2, 0.9]),
            truth: 1,
        }];
        let fit = fit_normalizer(NormalizerParams::default(), &rows, 10, 0.0).unwrap();
        assert_eq!(fit.params, NormalizerParams::default());
    }

    #[test]
    fn single_row_descent() {
        let rows = vec![LabelledRow {
            row: SimilarityRow::Dense(vec![0.1, 0.8, 0.3, 0.75]),
            truth: 1,
        }];
        let fit = fit_normalizer(NormalizerParams::default(), &rows, 50, 0.5).unwrap();
        assert!(fit.trace.len() > 1);
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(fit.trace.last().unwrap() < &fit.trace[0]);
        let b = normalize_row(&fit.params, &rows[0].row, 4).unwrap();
        assert_eq!(b.argmax(), Some(1));
    }

    proptest! {
        #[test]
        fn rows_are_sub_distributions(
            sims in prop::collection::vec(-1.0f64..1.0, 1..40),
            w1 in -3.0f64..3.0, w2 in -3.0f64..3.0, b in -2.0f64..2.0, rho in -3.0f64..3.0,
            k in 1usize..10,
        ) {
            let p = NormalizerParams { w_sim: w1, w_gap: w2, bias: b, log_temp: rho };
            let row = SimilarityRow::Dense(sims);
            let full: f64 = row_distribution(&p, &row).unwrap().iter().map(|x| x.1).sum();
            prop_assert!((full - 1.0).abs() < 1e-9);
            let br = normalize_row(&p, &row, k).unwrap();
            let s: f64 = br.probs.iter().sum();
            prop_assert!(br.gamma > 0.0 && br.gamma <= 1.0 + 1e-9);
            prop_assert!((s - br.gamma).abs() < 1e-9);
            prop_assert!(br.probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
        }

        #[test]
        fn shift_invariance(
            sims in prop::collection::vec(-1.0f64..1.0, 2..20),
            c in -5.0f64..5.0,
            w1 in -3.0f64..3.0, w2 in -3.0f64..3.0, rho in -2.0f64..2.0,
        ) {
            let p = NormalizerParams { w_sim: w1, w_gap: w2, bias: 0.3, log_temp: rho };
            let a = row_distribution(&p, &SimilarityRow::Dense(sims.clone())).unwrap();
            let shifted: Vec<f64> = sims.iter().map(|s| s + c).collect();
            let b = row_distribution(&p, &SimilarityRow::Dense(shifted)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.1 - y.1).abs() < 1e-9);
            }
        }

        #[test]
        fn monotone_in_similarity(
            sims in prop::collection::vec(-1.0f64..1.0, 2..20),
            w1 in 0.01f64..3.0, rho in -1.0f64..1.0,
        ) {
            let p = NormalizerParams { w_sim: w1, w_gap: 0.0, bias: 0.0, log_temp: rho };
            let d = row_distribution(&p, &SimilarityRow::Dense(sims.clone())).unwrap();
            for i in 0..sims.len() {
                for j in 0..sims.len() {
                    if sims[i] > sims[j] {
                        prop_assert!(d[i].1 > d[j].1);
                    }
                }
            }
        }
    }
}
