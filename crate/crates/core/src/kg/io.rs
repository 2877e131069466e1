use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EntityId, KnowledgeGraph};
use crate::error::{Error, Result};

/// Literal values in OpenEA-style dumps are quoted or carry a datatype suffix.
fn looks_literal(field: &str) -> bool {
    field.starts_with('"') || field.contains("^^")
}

pub fn load_kg(path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kg(&text, path)
}

/// Parse `head TAB relation TAB tail` lines. `origin` is only used in error messages.
pub fn parse_kg(text: &str, origin: &Path) -> Result<KnowledgeGraph> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: "empty field".into(),
            });
        }
        if looks_literal(fields[2]) {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: "literal/attribute triples are not supported".into(),
            });
        }
        rows.push((fields[0], fields[1], fields[2]));
    }
    if rows.is_empty() {
        return Err(Error::EmptyGraph(origin.to_owned()));
    }
    Ok(KnowledgeGraph::from_labels(rows))
}

pub fn load_links(
    path: impl AsRef<Path>,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
) -> Result<Vec<(EntityId, EntityId)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_links(&text, path, source, target)
}

/// Parse `source TAB target` lines into id pairs, in file order.
pub fn parse_links(
    text: &str,
    origin: &Path,
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
) -> Result<Vec<(EntityId, EntityId)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        let resolve = |kg: &KnowledgeGraph, label: &str| {
            kg.entities().get(label).ok_or_else(|| Error::UnknownLabel {
                path: origin.to_owned(),
                line: i + 1,
                label: label.to_owned(),
            })
        };
        let s = resolve(source, fields[0])?;
        let t = resolve(target, fields[1])?;
        if !seen.insert(s) {
            return Err(Error::OneToOne {
                path: origin.to_owned(),
                line: i + 1,
                label: fields[0].to_owned(),
            });
        }
        out.push((s, t));
    }
    Ok(out)
}

pub fn write_triples<W: Write>(kg: &KnowledgeGraph, mut w: W) -> std::io::Result<()> {
    for t in kg.triples() {
        writeln!(
            w,
            "{}\t{}\t{}",
            kg.entities().label(t.head),
            kg.relations().label(t.relation),
            kg.entities().label(t.tail)
        )?;
    }
    Ok(())
}

pub fn write_links<W: Write>(
    links: &[(EntityId, EntityId)],
    source: &KnowledgeGraph,
    target: &KnowledgeGraph,
    mut w: W,
) -> std::io::Result<()> {
    for &(s, t) in links {
        writeln!(
            w,
            "{}\t{}",
            source.entities().label(s),
            target.entities().label(t)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn duplicate_lines_collapse() {
        let kg = parse_kg("a\tr\tb\na\tr\tb\n", p()).unwrap();
        assert_eq!(
            (kg.num_entities(), kg.num_relations(), kg.triples().len()),
            (2, 1, 1)
        );
    }

    #[test]
    fn two_triples_counted() {
        let kg = parse_kg("a\tr\tb\nb\ts\tc\n", p()).unwrap();
        assert_eq!(
            (kg.num_entities(), kg.num_relations(), kg.triples().len()),
            (3, 2, 2)
        );
    }

    #[test]
    fn wrong_field_count_names_line() {
        let err = parse_kg("a\tr\tb\n\na\tr\n", p()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(parse_kg("\n\n", p()), Err(Error::EmptyGraph(_))));
    }

    #[test]
    fn literals_are_rejected() {
        assert!(parse_kg("a\tname\t\"Alice\"@en\n", p()).is_err());
    }

    #[test]
    fn links_resolve_and_validate() {
        let kg1 = parse_kg("a\tr\tb\n", p()).unwrap();
        let kg2 = parse_kg("a'\tr\tb'\n", p()).unwrap();
        assert_eq!(
            parse_links("a\ta'\n", p(), &kg1, &kg2).unwrap(),
            vec![(0, 0)]
        );
        assert!(matches!(
            parse_links("zz\ta'\n", p(), &kg1, &kg2),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(matches!(
            parse_links("a\ta'\na\tb'\n", p(), &kg1, &kg2),
            Err(Error::OneToOne { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn serialize_round_trip(rows in prop::collection::vec((0u8..6, 0u8..3, 0u8..6), 1..30)) {
            let text: String = rows
                .iter()
                .map(|(h, r, t)| format!("e{h}\tr{r}\te{t}\n"))
                .collect();
            let kg = parse_kg(&text, p()).unwrap();
            let mut buf = Vec::new();
            write_triples(&kg, &mut buf).unwrap();
            let again = parse_kg(std::str::from_utf8(&buf).unwrap(), p()).unwrap();
            prop_assert_eq!(kg, again);
        }
    }
}
