//! Knowledge-graph data model: vocabularies, deduplicated triple stores with
//! a two-sided adjacency index, and the alignment state over a graph pair.

mod io;
mod synth;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use io::{load_kg, load_links, parse_kg, parse_links, write_links, write_triples};
pub use synth::{generate_synthetic_pair, SyntheticPair, SyntheticPairConfig};

pub type EntityId = usize;
pub type RelationId = usize;

/// Dense label <-> id mapping; ids follow first-insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// One endpoint view of a triple, as seen from the entity it is indexed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub triple: usize,
    pub relation: RelationId,
    pub neighbour: EntityId,
    /// `true` when the indexed entity is the head.
    pub outgoing: bool,
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    adjacency: Vec<Vec<Incidence>>,
}

impl KnowledgeGraph {
    /// Build from label triples; duplicates are dropped and ids are assigned in
    /// first-appearance order (head, relation, tail).
    pub fn from_labels<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (h, r, t) in triples {
            let head = entities.intern(h);
            let relation = relations.intern(r);
            let tail = entities.intern(t);
            let triple = Triple {
                head,
                relation,
                tail,
            };
            if seen.insert(triple) {
                out.push(triple);
            }
        }
        Self::from_parts(entities, relations, out)
    }

    /// Build from explicit vocabularies and id triples. Duplicate triples are dropped.
    ///
    /// Panics if a triple references an id outside the vocabularies.
    pub fn from_parts(entities: Vocab, relations: Vocab, triples: Vec<Triple>) -> Self {
        let mut seen = HashSet::with_capacity(triples.len());
        let triples: Vec<Triple> = triples.into_iter().filter(|t| seen.insert(*t)).collect();
        let mut adjacency = vec![Vec::new(); entities.len()];
        for (i, t) in triples.iter().enumerate() {
            assert!(
                t.head < entities.len() && t.tail < entities.len() && t.relation < relations.len(),
                "triple {t:?} out of vocabulary bounds"
            );
            adjacency[t.head].push(Incidence {
                triple: i,
                relation: t.relation,
                neighbour: t.tail,
                outgoing: true,
            });
            adjacency[t.tail].push(Incidence {
                triple: i,
                relation: t.relation,
                neighbour: t.head,
                outgoing: false,
            });
        }
        Self {
            entities,
            relations,
            triples,
            adjacency,
        }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn adjacency(&self, e: EntityId) -> &[Incidence] {
        &self.adjacency[e]
    }

    /// Distinct one-hop neighbours of `e` in either direction, ascending, excluding `e`.
    pub fn neighbours(&self, e: EntityId) -> Vec<EntityId> {
        let mut n: Vec<EntityId> = self.adjacency[e]
            .iter()
            .map(|inc| inc.neighbour)
            .filter(|&n| n != e)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Relations `r` with `r(head, tail)` in the graph.
    pub fn relations_between(
        &self,
        head: EntityId,
        tail: EntityId,
    ) -> impl Iterator<Item = RelationId> + '_ {
        self.adjacency[head]
            .iter()
            .filter(move |inc| inc.outgoing && inc.neighbour == tail)
            .map(|inc| inc.relation)
    }
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.triples == other.triples
    }
}

/// Labelled seeds over `L` and point assignments over `U = E \ L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentState {
    labelled: Vec<Option<EntityId>>,
    assigned: Vec<Option<EntityId>>,
}

impl AlignmentState {
    /// Panics if a seed source is out of range or repeated.
    pub fn new(num_source: usize, seeds: &[(EntityId, EntityId)]) -> Self {
        let mut labelled = vec![None; num_source];
        for &(s, t) in seeds {
            assert!(labelled[s].is_none(), "source {s} labelled twice");
            labelled[s] = Some(t);
        }
        Self {
            labelled,
            assigned: vec![None; num_source],
        }
    }

    pub fn num_source(&self) -> usize {
        self.labelled.len()
    }

    pub fn is_labelled(&self, e: EntityId) -> bool {
        self.labelled[e].is_some()
    }

    /// Assign an unlabelled entity. Panics on a labelled one.
    pub fn assign(&mut self, u: EntityId, target: EntityId) {
        assert!(
            self.labelled[u].is_none(),
            "cannot assign labelled entity {u}"
        );
        self.assigned[u] = Some(target);
    }

    pub fn unassign(&mut self, u: EntityId) {
        self.assigned[u] = None;
    }

    /// Current label: the seed for `L`, the assignment for `U`.
    pub fn label(&self, e: EntityId) -> Option<EntityId> {
        self.labelled[e].or(self.assigned[e])
    }

    pub fn labels(&self) -> Vec<Option<EntityId>> {
        (0..self.num_source()).map(|e| self.label(e)).collect()
    }

    pub fn labelled(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.labelled
            .iter()
            .enumerate()
            .filter_map(|(e, t)| t.map(|t| (e, t)))
    }

    pub fn unlabelled(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.num_source()).filter(|&e| self.labelled[e].is_none())
    }

    pub fn assigned(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.assigned
            .iter()
            .enumerate()
            .filter_map(|(e, t)| t.map(|t| (e, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> KnowledgeGraph {
        KnowledgeGraph::from_labels([
            ("a", "r", "b"),
            ("b", "s", "c"),
            ("c", "r", "c"),
            ("a", "r", "b"),
        ])
    }

    #[test]
    fn dedup_and_first_appearance_ids() {
        let kg = small();
        assert_eq!(kg.num_entities(), 3);
        assert_eq!(kg.num_relations(), 2);
        assert_eq!(kg.triples().len(), 3);
        assert_eq!(kg.entities().get("a"), Some(0));
        assert_eq!(kg.entities().get("c"), Some(2));
        assert_eq!(kg.relations().get("s"), Some(1));
    }

    #[test]
    fn adjacency_covers_each_triple_twice() {
        let kg = small();
        let mut count = vec![0usize; kg.triples().len()];
        for e in 0..kg.num_entities() {
            for inc in kg.adjacency(e) {
                let t = kg.triples()[inc.triple];
                assert!(t.head == e || t.tail == e);
                count[inc.triple] += 1;
            }
        }
        assert!(count.iter().all(|&c| c == 2));
    }

    #[test]
    fn neighbours_both_directions() {
        let kg = small();
        assert_eq!(kg.neighbours(1), vec![0, 2]);
        // self-loop does not make c its own neighbour
        assert_eq!(kg.neighbours(2), vec![1]);
        assert_eq!(kg.relations_between(0, 1).collect::<Vec<_>>(), vec![0]);
        assert_eq!(kg.relations_between(1, 0).count(), 0);
    }

    #[test]
    fn alignment_partition() {
        let mut st = AlignmentState::new(4, &[(0, 3), (2, 1)]);
        assert!(st.is_labelled(0) && !st.is_labelled(1));
        assert_eq!(st.unlabelled().collect::<Vec<_>>(), vec![1, 3]);
        st.assign(1, 0);
        assert_eq!(st.labels(), vec![Some(3), Some(0), Some(1), None]);
    }

    #[test]
    #[should_panic]
    fn assigning_labelled_panics() {
        let mut st = AlignmentState::new(2, &[(0, 0)]);
        st.assign(0, 1);
    }
}
