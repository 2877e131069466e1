use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{split_links, RunConfig, DEFAULT_VALIDATION};
use super::{create, write_json};
use crate::compatibility::RuleWeights;
use crate::error::{Error, Result};
use crate::inference::{run_emea, IterationRecord, LinkSets, PhaseTiming};
use crate::kg::{load_kg, load_links, write_links, EntityId, KnowledgeGraph};
use crate::normalizer::NormalizerParams;

pub const MANIFEST_FILE: &str = "manifest.json";
const EMBEDDINGS_FILE: &str = "embeddings.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Output files, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub embeddings: PathBuf,
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    /// Neural top-1 target for every source entity.
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub splits: SplitSizes,
    pub rule_names: Vec<String>,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub stopped_early: bool,
    pub final_weights: RuleWeights,
    pub final_normalizer: NormalizerParams,
    pub artifacts: Artifacts,
    /// Wall-clock seconds per phase; the only non-reproducible field.
    pub timings: Vec<PhaseTiming>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn save_links(
    path: &Path,
    links: &[(EntityId, EntityId)],
    s: &KnowledgeGraph,
    t: &KnowledgeGraph,
) -> Result<()> {
    write_links(links, s, t, create(path)?).map_err(|e| Error::io(path, e))
}

/// Load the config at `path`, run the pipeline and write the manifest and
/// artifacts into the configured output directory.
pub fn run_from_config(path: &Path) -> Result<Manifest> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "config file {} not found",
            path.display()
        )));
    }
    let cfg = RunConfig::load(path)?;
    let source = load_kg(&cfg.kg1)?;
    let target = load_kg(&cfg.kg2)?;

    let mut inputs = vec![("kg1", cfg.kg1.clone()), ("kg2", cfg.kg2.clone())];
    let (train, valid, test) = match (&cfg.links, &cfg.train, &cfg.valid) {
        (Some(links), _, _) => {
            inputs.push(("links", links.clone()));
            let all = load_links(links, &source, &target)?;
            split_links(
                &all,
                cfg.seed_fraction.expect("validated"),
                cfg.validation_count.unwrap_or(DEFAULT_VALIDATION),
                cfg.root_seed(),
            )?
        }
        (None, Some(train), Some(valid)) => {
            inputs.push(("train", train.clone()));
            inputs.push(("valid", valid.clone()));
            let test = match &cfg.test {
                Some(p) => {
                    inputs.push(("test", p.clone()));
                    load_links(p, &source, &target)?
                }
                None => Vec::new(),
            };
            (
                load_links(train, &source, &target)?,
                load_links(valid, &source, &target)?,
                test,
            )
        }
        _ => unreachable!("validated"),
    };
    let inputs = inputs
        .into_iter()
        .map(|(role, p)| {
            Ok(InputDigest {
                role: role.to_owned(),
                sha256: sha256_file(&p)?,
                path: p,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let emea_cfg = cfg.emea_config();
    let links = LinkSets {
        valid: valid.clone(),
        test: test.clone(),
    };
    let result = run_emea(&source, &target, &train, &links, &emea_cfg)?;

    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let artifacts = Artifacts {
        embeddings: EMBEDDINGS_FILE.into(),
        train: "train.tsv".into(),
        valid: "valid.tsv".into(),
        test: "test.tsv".into(),
        predictions: "predictions.tsv".into(),
    };
    write_json(&out.join(&artifacts.embeddings), &result.embeddings)?;
    save_links(&out.join(&artifacts.train), &train, &source, &target)?;
    save_links(&out.join(&artifacts.valid), &valid, &source, &target)?;
    save_links(&out.join(&artifacts.test), &test, &source, &target)?;
    let predictions: Vec<(EntityId, EntityId)> = result
        .state
        .labels()
        .into_iter()
        .enumerate()
        .filter_map(|(e, t)| t.map(|t| (e, t)))
        .collect();
    save_links(
        &out.join(&artifacts.predictions),
        &predictions,
        &source,
        &target,
    )?;

    let manifest = Manifest {
        tool: format!("emea {}", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        inputs,
        splits: SplitSizes {
            train: train.len(),
            valid: valid.len(),
            test: test.len(),
        },
        rule_names: emea_cfg
            .em
            .rules
            .rule_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        history: result.history,
        iterations: result.iteration,
        stopped_early: result.stopped_early,
        final_weights: result.weights,
        final_normalizer: result.normalizer,
        artifacts,
        timings: result.timings,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
