#![allow(dead_code)]

use emea::compatibility::{
    CompatibilityModel, FactorSubset, LabelView, RuleSetKind, RuleWeights, Rules,
};
use emea::kg::EntityId;
use emea::normalizer::{BeliefRow, BeliefTable};
use emea::rng::phase_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Indicators drawn from a hash of the factor's labels: an arbitrary but
/// deterministic function of `y_F`.
pub struct HashedRules {
    pub num_rules: usize,
    pub salt: u64,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Rules for HashedRules {
    fn num_rules(&self) -> usize {
        self.num_rules
    }

    fn indicators(&self, factor: &FactorSubset, labels: &dyn LabelView, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut h = mix(self.salt ^ (k as u64) << 32 ^ factor.anchor as u64);
            for &m in &factor.members {
                let l = labels.label(m).map_or(u64::MAX, |l| l as u64);
                h = mix(h ^ (m as u64) << 20 ^ l);
            }
            *o = (h >> 11) as f64 / (1u64 << 53) as f64;
        }
    }
}

pub struct TinyInstance {
    pub model: CompatibilityModel<HashedRules>,
    pub weights: RuleWeights,
    pub num_target: usize,
    pub latent: Vec<EntityId>,
    pub labels: Vec<Option<EntityId>>,
    pub focus: EntityId,
}

/// Up to 5 source entities, `|U| ≤ 3`, `|E'| ≤ 4`, random sparse factors and
/// weights.
pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut rng = phase_rng(seed, "tiny-instance");
    let num_source = rng.gen_range(2..=5);
    let num_target = rng.gen_range(2..=4);
    let num_rules = rng.gen_range(1..=3);
    let mut factors = Vec::new();
    for a in 0..num_source {
        for _ in 0..rng.gen_range(1..=2) {
            let members: Vec<EntityId> = (0..num_source)
                .filter(|&m| m != a && rng.gen_bool(0.35))
                .collect();
            factors.push(FactorSubset::new(a, members, RuleSetKind::Paris));
        }
    }
    let mut ids: Vec<EntityId> = (0..num_source).collect();
    ids.shuffle(&mut rng);
    let n_latent = rng.gen_range(1..=3.min(num_source));
    let mut latent = ids[..n_latent].to_vec();
    latent.sort_unstable();
    let focus = latent[rng.gen_range(0..latent.len())];
    let labels = (0..num_source)
        .map(|_| Some(rng.gen_range(0..num_target)))
        .collect();
    let weights = RuleWeights {
        phi: (0..num_rules).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        phi0: rng.gen_range(-2.0..2.0),
    };
    TinyInstance {
        model: CompatibilityModel::new(
            num_source,
            factors,
            HashedRules {
                num_rules,
                salt: rng.gen(),
            },
        ),
        weights,
        num_target,
        latent,
        labels,
        focus,
    }
}

/// Random candidate rows over `num_target` targets, including each entity's
/// current label so the pseudo-likelihood is defined.
pub fn random_beliefs(
    rng: &mut ChaCha8Rng,
    labels: &[Option<EntityId>],
    num_target: usize,
    k: usize,
) -> BeliefTable {
    let rows = labels
        .iter()
        .map(|l| {
            let mut c: Vec<EntityId> = (0..num_target).collect();
            c.shuffle(rng);
            c.truncate(k.min(num_target));
            if let Some(l) = l {
                if !c.contains(l) {
                    c[0] = *l;
                }
            }
            let raw: Vec<f64> = c.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
            let gamma = rng.gen_range(0.3..1.0);
            let z: f64 = raw.iter().sum();
            BeliefRow {
                probs: raw.iter().map(|p| gamma * p / z).collect(),
                candidates: c,
                gamma,
            }
        })
        .collect();
    BeliefTable { rows }
}
