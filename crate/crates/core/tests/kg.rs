use std::path::Path;

use emea::kg::{generate_synthetic_pair, parse_kg, write_triples, SyntheticPairConfig};

fn config(seed: u64, dropout: f64) -> SyntheticPairConfig {
    SyntheticPairConfig {
        entity_count: 2000,
        relation_count: 10,
        mean_degree: 4.0,
        edge_dropout: dropout,
        relation_rename: false,
        rng_seed: seed,
    }
}

#[test]
fn dropout_keeps_a_binomial_share_of_triples() {
    for (seed, d) in [(0, 0.2), (1, 0.5), (2, 0.05)] {
        let cfg = config(seed, d);
        let m = cfg.base_triple_count() as f64;
        let mean = m * (1.0 - d);
        let sd = (m * d * (1.0 - d)).sqrt();
        let p = generate_synthetic_pair(&cfg).unwrap();
        for kg in [&p.source, &p.target] {
            let kept = kg.triples().len() as f64;
            assert!(
                (kept - mean).abs() <= 5.0 * sd,
                "kept {kept}, expected {mean} ± {sd}"
            );
        }
    }
}

#[test]
fn no_dropout_gives_isomorphic_copies() {
    let p = generate_synthetic_pair(&config(7, 0.0)).unwrap();
    assert_eq!(p.source.triples().len(), p.target.triples().len());
    assert_eq!(p.truth.len(), p.source.num_entities());
    let map: Vec<usize> = {
        let mut m = vec![usize::MAX; p.source.num_entities()];
        for &(s, t) in &p.truth {
            m[s] = t;
        }
        m
    };
    let mut mapped: Vec<(usize, String, usize)> = p
        .source
        .triples()
        .iter()
        .map(|t| {
            (
                map[t.head],
                p.source.relations().label(t.relation).to_owned(),
                map[t.tail],
            )
        })
        .collect();
    let mut target: Vec<(usize, String, usize)> = p
        .target
        .triples()
        .iter()
        .map(|t| {
            (
                t.head,
                p.target.relations().label(t.relation).to_owned(),
                t.tail,
            )
        })
        .collect();
    mapped.sort();
    target.sort();
    assert_eq!(mapped, target);
}

#[test]
fn truth_links_name_the_same_base_entity() {
    let p = generate_synthetic_pair(&config(3, 0.3)).unwrap();
    for &(s, t) in &p.truth {
        let a = p.source.entities().label(s).trim_end_matches("_1");
        let b = p.target.entities().label(t).trim_end_matches("_2");
        assert_eq!(a, b);
    }
    assert!(p.truth.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn renamed_relations_are_disjoint() {
    let mut cfg = config(4, 0.2);
    cfg.relation_rename = true;
    let p = generate_synthetic_pair(&cfg).unwrap();
    for r in p.source.relations().labels() {
        assert!(p.target.relations().get(r).is_none());
    }
}

#[test]
fn tsv_round_trip() {
    let p = generate_synthetic_pair(&config(5, 0.2)).unwrap();
    let mut buf = Vec::new();
    write_triples(&p.source, &mut buf).unwrap();
    let back = parse_kg(std::str::from_utf8(&buf).unwrap(), Path::new("mem")).unwrap();
    assert_eq!(back.num_entities(), p.source.num_entities());
    assert_eq!(back.triples(), p.source.triples());
}

#[test]
fn impossible_requests_fail() {
    let mut cfg = config(0, 0.2);
    cfg.entity_count = 3;
    cfg.relation_count = 1;
    cfg.mean_degree = 10.0;
    assert!(generate_synthetic_pair(&cfg).is_err());
    cfg.mean_degree = 0.1;
    assert!(generate_synthetic_pair(&cfg).is_err());
    let mut cfg = config(0, 1.5);
    assert!(generate_synthetic_pair(&cfg).is_err());
    cfg.edge_dropout = 1.0;
    assert!(generate_synthetic_pair(&cfg).is_err());
}
