use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::compatibility::RuleSetKind;
use crate::error::{Error, Result};
use crate::inference::{EmConfig, EmeaConfig};
use crate::kg::EntityId;
use crate::normalizer::NormalizerParams;
use crate::rng::phase_rng;
use crate::similarity::EncoderConfig;

/// Validation links used when the config does not say otherwise.
pub const DEFAULT_VALIDATION: usize = 100;

/// A full `emea run` configuration. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kg1: PathBuf,
    pub kg2: PathBuf,
    /// All reference links, split in-tool with `seed_fraction`.
    #[serde(default)]
    pub links: Option<PathBuf>,
    #[serde(default)]
    pub seed_fraction: Option<f64>,
    #[serde(default)]
    pub validation_count: Option<usize>,
    /// Pre-split links; used when `links` is absent.
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub valid: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub normalizer: NormalizerParams,
    #[serde(default)]
    pub em: EmConfig,
    /// Overrides `em.rules` when set.
    #[serde(default)]
    pub rules: Option<RuleSetKind>,
    pub output: PathBuf,
    /// Root seed for every random phase; overrides `em.rng_seed` when set.
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.kg1);
        fix(&mut self.kg2);
        fix(&mut self.output);
        for p in [
            &mut self.links,
            &mut self.train,
            &mut self.valid,
            &mut self.test,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.links, &self.train) {
            (Some(_), None) => {
                let f = self
                    .seed_fraction
                    .ok_or_else(|| Error::Config("`links` needs `seed_fraction`".into()))?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Config(format!("seed_fraction {f} is not in (0, 1)")));
                }
            }
            (None, Some(_)) => {
                if self.valid.is_none() {
                    return Err(Error::Config("`train` needs `valid`".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "give either `links` with `seed_fraction` or `train` and `valid`".into(),
                ))
            }
        }
        self.encoder.validate()?;
        self.em.validate()
    }

    /// The library configuration with the top-level overrides applied.
    pub fn emea_config(&self) -> EmeaConfig {
        let mut em = self.em.clone();
        if let Some(r) = self.rules {
            em.rules = r;
        }
        em.rng_seed = self.root_seed();
        EmeaConfig {
            encoder: self.encoder.clone(),
            normalizer: self.normalizer,
            em,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.rng_seed.unwrap_or(self.em.rng_seed)
    }
}

pub type LinkSplit = (
    Vec<(EntityId, EntityId)>,
    Vec<(EntityId, EntityId)>,
    Vec<(EntityId, EntityId)>,
);

/// Shuffle and cut into `(train, valid, test)`: `round(fraction·n)` training
/// links, `min(validation, n/10)` validation links, the rest for testing.
pub fn split_links(
    links: &[(EntityId, EntityId)],
    fraction: f64,
    validation: usize,
    rng_seed: u64,
) -> Result<LinkSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "seed fraction {fraction} is not in (0, 1)"
        )));
    }
    let n = links.len();
    let n_train = (fraction * n as f64).round() as usize;
    let n_valid = validation.min(n / 10);
    if n_train == 0 || n_train + n_valid > n {
        return Err(Error::Config(format!(
            "cannot split {n} links into {n_train} training and {n_valid} validation links"
        )));
    }
    let mut shuffled = links.to_vec();
    shuffled.shuffle(&mut phase_rng(rng_seed, "split"));
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok((shuffled, valid, test))
}
