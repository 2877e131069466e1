//! The `emea` command line.

mod config;
mod run;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{compatibility_profile, truth_ranks, CompatibilityProfile, MetricReport};
use crate::inference::map_assignment;
use crate::kg::{
    generate_synthetic_pair, load_kg, load_links, write_links, write_triples, SyntheticPairConfig,
};
use crate::normalizer::build_belief_table;
use crate::similarity::{
    build_candidate_table, import_candidate_table, train_baseline_encoder, CandidateTable,
    EmbeddingTable, EncoderConfig, SimilaritySource,
};
use crate::stats::relation_stats;

pub use config::{split_links, LinkSplit, RunConfig, DEFAULT_VALIDATION};
pub use run::{run_from_config, InputDigest, Manifest, SplitSizes};

#[derive(Parser, Debug)]
#[command(name = "emea", version, about = "Compatibility-aware entity alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic pair of graphs with known alignment.
    Synth {
        #[arg(long, default_value_t = 1000)]
        entities: usize,
        #[arg(long, default_value_t = 20)]
        relations: usize,
        #[arg(long, default_value_t = 4.0)]
        degree: f64,
        #[arg(long, default_value_t = 0.2)]
        dropout: f64,
        /// Give the two copies disjoint relation names.
        #[arg(long)]
        rename: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for kg1.tsv, kg2.tsv and links.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Relation functionalities and subrelation probabilities under some links.
    Stats {
        #[arg(long)]
        kg1: PathBuf,
        #[arg(long)]
        kg2: PathBuf,
        #[arg(long)]
        links: PathBuf,
    },
    /// Train the translational encoder on seed links.
    TrainBaseline {
        #[arg(long)]
        kg1: PathBuf,
        #[arg(long)]
        kg2: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// Encoder settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the top-k candidate table from embeddings or an imported dump.
    Candidates {
        #[arg(long)]
        kg1: PathBuf,
        #[arg(long)]
        kg2: PathBuf,
        #[arg(long, conflicts_with = "import", required_unless_present = "import")]
        embeddings: Option<PathBuf>,
        /// `source TAB target TAB similarity` lines.
        #[arg(long)]
        import: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full EM pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a run (or an imported similarity table) against test links.
    Eval {
        /// Manifest written by `emea run`.
        #[arg(
            long,
            conflicts_with = "similarities",
            required_unless_present = "similarities"
        )]
        pred: Option<PathBuf>,
        /// Imported `source TAB target TAB similarity` table; needs --kg1/--kg2.
        #[arg(long, requires_all = ["kg1", "kg2"])]
        similarities: Option<PathBuf>,
        #[arg(long)]
        kg1: Option<PathBuf>,
        #[arg(long)]
        kg2: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        /// Add PARIS compatibility and conflict statistics of the predictions.
        #[arg(long)]
        diagnostics: bool,
    },
}

/// Parse `args` (including the program name), run the command and return the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() {
    let threads = std::env::var("EMEA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() {}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            entities,
            relations,
            degree,
            dropout,
            rename,
            seed,
            out,
        } => {
            let cfg = SyntheticPairConfig {
                entity_count: entities,
                relation_count: relations,
                mean_degree: degree,
                edge_dropout: dropout,
                relation_rename: rename,
                rng_seed: seed,
            };
            let pair = generate_synthetic_pair(&cfg)?;
            let p = out.join("kg1.tsv");
            write_triples(&pair.source, create(&p)?).map_err(|e| Error::io(&p, e))?;
            let p = out.join("kg2.tsv");
            write_triples(&pair.target, create(&p)?).map_err(|e| Error::io(&p, e))?;
            let p = out.join("links.tsv");
            write_links(&pair.truth, &pair.source, &pair.target, create(&p)?)
                .map_err(|e| Error::io(&p, e))?;
            print_json(&serde_json::json!({
                "config": cfg,
                "source_entities": pair.source.num_entities(),
                "source_triples": pair.source.triples().len(),
                "target_entities": pair.target.num_entities(),
                "target_triples": pair.target.triples().len(),
                "links": pair.truth.len(),
            }))
        }
        Command::Stats { kg1, kg2, links } => {
            let (s, t) = (load_kg(&kg1)?, load_kg(&kg2)?);
            let links = load_links(&links, &s, &t)?;
            let mut labels = vec![None; s.num_entities()];
            for (a, b) in links {
                labels[a] = Some(b);
            }
            print_json(&stats_report(&s, &t, &labels))
        }
        Command::TrainBaseline {
            kg1,
            kg2,
            train,
            config,
            out,
        } => {
            let (s, t) = (load_kg(&kg1)?, load_kg(&kg2)?);
            let seeds = load_links(&train, &s, &t)?;
            let cfg: EncoderConfig = match config {
                Some(p) => read_json(&p)?,
                None => EncoderConfig::default(),
            };
            let (emb, log) = train_baseline_encoder(&s, &t, &seeds, &cfg, &[])?;
            write_json(&out, &emb)?;
            print_json(&serde_json::json!({
                "epochs": log.len(),
                "final_loss": log.last(),
                "embeddings": out,
            }))
        }
        Command::Candidates {
            kg1,
            kg2,
            embeddings,
            import,
            k,
            out,
        } => {
            if k == 0 {
                return Err(Error::Config("k must be positive".into()));
            }
            let (s, t) = (load_kg(&kg1)?, load_kg(&kg2)?);
            let table: CandidateTable = match (embeddings, import) {
                (Some(p), _) => {
                    let emb: EmbeddingTable = read_json(&p)?;
                    check_shape(&emb, s.num_entities(), t.num_entities())?;
                    build_candidate_table(&emb, k)
                }
                (None, Some(p)) => import_candidate_table(&p, &s, &t, k)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            let mut w = create(&out)?;
            for (e, row) in table.rows.iter().enumerate() {
                for &(c, sim) in row {
                    writeln!(
                        w,
                        "{}\t{}\t{}",
                        s.entities().label(e),
                        t.entities().label(c),
                        sim
                    )
                    .map_err(|err| Error::io(&out, err))?;
                }
            }
            w.flush().map_err(|e| Error::io(&out, e))
        }
        Command::Run { config } => {
            let manifest = run_from_config(&config)?;
            let last = manifest
                .history
                .last()
                .expect("iteration 0 is always recorded");
            print_json(&serde_json::json!({
                "manifest": manifest.config.output.join(run::MANIFEST_FILE),
                "iterations": manifest.iterations,
                "valid": last.neural_valid,
                "test": last.neural_test,
            }))
        }
        Command::Eval {
            pred,
            similarities,
            kg1,
            kg2,
            test,
            diagnostics,
        } => eval_command(pred, similarities, kg1, kg2, &test, diagnostics),
    }
}

fn check_shape(emb: &EmbeddingTable, n_src: usize, n_tgt: usize) -> Result<()> {
    if emb.num_source() != n_src || emb.num_target() != n_tgt {
        return Err(Error::Input(format!(
            "embeddings cover {}x{} entities, graphs have {n_src}x{n_tgt}",
            emb.num_source(),
            emb.num_target()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct RankEntry {
    source: String,
    target: String,
    rank: usize,
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    report: MetricReport,
    ranks: Vec<RankEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<CompatibilityProfile>,
}

fn eval_command(
    pred: Option<PathBuf>,
    similarities: Option<PathBuf>,
    kg1: Option<PathBuf>,
    kg2: Option<PathBuf>,
    test: &Path,
    diagnostics: bool,
) -> Result<()> {
    let (s, t, sims, k, params): (_, _, Box<dyn SimilaritySource>, _, _) =
        match (pred, similarities) {
            (Some(manifest_path), _) => {
                let manifest: Manifest = read_json(&manifest_path)?;
                let s = load_kg(&manifest.config.kg1)?;
                let t = load_kg(&manifest.config.kg2)?;
                let dir = manifest_path.parent().unwrap_or(Path::new(""));
                let emb: EmbeddingTable = read_json(&dir.join(&manifest.artifacts.embeddings))?;
                check_shape(&emb, s.num_entities(), t.num_entities())?;
                let k = manifest.config.em.k;
                (s, t, Box::new(emb), k, manifest.final_normalizer)
            }
            (None, Some(p)) => {
                let (s, t) = (
                    load_kg(kg1.as_ref().expect("clap enforces kg1"))?,
                    load_kg(kg2.as_ref().expect("clap enforces kg2"))?,
                );
                let table = import_candidate_table(&p, &s, &t, usize::MAX)?;
                let k = table.k;
                (s, t, Box::new(table), k, Default::default())
            }
            (None, None) => unreachable!("clap requires one source"),
        };
    let links = load_links(test, &s, &t)?;
    let ranks = truth_ranks(sims.as_ref(), &links)?;
    let report = MetricReport::from_ranks(&ranks)?;
    let diagnostics = if diagnostics {
        let beliefs = build_belief_table(&params, sims.as_ref(), k)?;
        let state = map_assignment(&beliefs, &[])?;
        let stats = relation_stats(&s, &t, &state.labels());
        Some(compatibility_profile(&state, &stats, &s, &t))
    } else {
        None
    };
    print_json(&EvalOutput {
        report,
        ranks: links
            .iter()
            .zip(&ranks)
            .map(|(&(a, b), &rank)| RankEntry {
                source: s.entities().label(a).to_owned(),
                target: t.entities().label(b).to_owned(),
                rank,
            })
            .collect(),
        diagnostics,
    })
}

fn stats_report(
    s: &crate::kg::KnowledgeGraph,
    t: &crate::kg::KnowledgeGraph,
    labels: &[Option<usize>],
) -> serde_json::Value {
    let st = relation_stats(s, t, labels);
    let fun = |kg: &crate::kg::KnowledgeGraph, f: &crate::stats::Functionality| {
        (0..kg.num_relations())
            .map(|r| {
                serde_json::json!({
                    "relation": kg.relations().label(r),
                    "fun": f.fun(r),
                    "inv_fun": f.inv_fun(r),
                })
            })
            .collect::<Vec<_>>()
    };
    let mut pairs = Vec::new();
    for r in 0..s.num_relations() {
        for rt in 0..t.num_relations() {
            let fwd = st.sub.forward_hits.contains_key(&(r, rt));
            let bwd = st.sub.backward_hits.contains_key(&(rt, r));
            if fwd || bwd {
                pairs.push(serde_json::json!({
                    "source": s.relations().label(r),
                    "target": t.relations().label(rt),
                    "source_in_target": st.sub.source_in_target(r, rt),
                    "target_in_source": st.sub.target_in_source(rt, r),
                }));
            }
        }
    }
    serde_json::json!({
        "source": fun(s, &st.source),
        "target": fun(t, &st.target),
        "subrelations": pairs,
    })
}
