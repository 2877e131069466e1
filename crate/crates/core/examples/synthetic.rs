//! Align a synthetic graph pair and print per-iteration accuracy.
//!
//! cargo run --release --example synthetic -- [entities] [seed]

use emea::inference::{run_emea, EmeaConfig, LinkSets};
use emea::kg::{generate_synthetic_pair, SyntheticPairConfig};
use emea::rng::phase_rng;
use rand::seq::SliceRandom;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let entities = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let pair = generate_synthetic_pair(&SyntheticPairConfig {
        entity_count: entities,
        relation_count: 20,
        mean_degree: 4.0,
        edge_dropout: 0.2,
        relation_rename: false,
        rng_seed: seed,
    })?;
    let mut links = pair.truth.clone();
    links.shuffle(&mut phase_rng(seed, "split"));
    let n_seed = (0.05 * links.len() as f64).round() as usize;
    let n_valid = 100.min(links.len() / 10);
    let sets = LinkSets {
        valid: links[n_seed..n_seed + n_valid].to_vec(),
        test: links[n_seed + n_valid..].to_vec(),
    };
    let mut cfg = EmeaConfig::default();
    cfg.em.rng_seed = seed;
    let run = run_emea(&pair.source, &pair.target, &links[..n_seed], &sets, &cfg)?;

    println!("iter  hit@1  mrr    conflicts  paris  phi");
    for r in &run.history {
        let m = r.neural_test.expect("test links given");
        println!(
            "{:<5} {:.3}  {:.3}  {:.3}      {:.3}  {:.2?}",
            r.iteration, m.hit1, m.mrr, r.conflict_rate, r.paris_compatibility, r.weights.phi
        );
    }
    Ok(())
}
