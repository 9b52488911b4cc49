// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use super::intern::{ClassId, EntityId, PredicateId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub s: EntityId,
    pub p: PredicateId,
    pub o: EntityId,
}

impl Triple {
    pub fn new(s: EntityId, p: PredicateId, o: EntityId) -> Self {
        Triple { s, p, o }
    }

    pub fn display(&self, vocab: &Vocabulary) -> String {
        format!(
            "{}\t{}\t{}",
            vocab.entity_name(self.s),
            vocab.predicate_name(self.p),
            vocab.entity_name(self.o)
        )
    }
}

/// Edge orientation. `Forward` follows an edge subject to object (outgoing
/// adjacency), `Backward` object to subject (incoming adjacency).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Read access to an ABox. Implemented by the graph itself and by filtered
/// views over it.
pub trait GraphView: Sync {
    /// Adjacency of `v` in `dir`, sorted by predicate then neighbor.
    fn neighbors(&self, v: EntityId, dir: Direction) -> impl Iterator<Item = (PredicateId, EntityId)> + '_;

    /// Adjacency restricted to one predicate.
    fn neighbors_via(
        &self,
        v: EntityId,
        dir: Direction,
        p: PredicateId,
    ) -> impl Iterator<Item = EntityId> + '_;

    fn contains(&self, t: &Triple) -> bool;

    /// Asserted types; empty means untyped (treated as `Thing`).
    fn types_of(&self, v: EntityId) -> &[ClassId];

    fn num_entities(&self) -> usize;
}

/// Indexed directed labeled multigraph of facts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ABoxGraph {
    triples: Vec<Triple>,
    out_adj: Vec<Vec<(PredicateId, EntityId)>>,
    in_adj: Vec<Vec<(PredicateId, EntityId)>>,
    types: Vec<Vec<ClassId>>,
}

impl ABoxGraph {
    /// Builds the indices. Duplicate triples and type assertions are dropped.
    pub fn new(
        num_entities: usize,
        triples: impl IntoIterator<Item = Triple>,
        type_assertions: impl IntoIterator<Item = (EntityId, ClassId)>,
    ) -> Self {
        let mut triples: Vec<Triple> = triples.into_iter().collect();
        triples.sort_unstable();
        triples.dedup();

        let mut n = num_entities;
        for t in &triples {
            n = n.max(t.s.index() + 1).max(t.o.index() + 1);
        }
        let mut type_assertions: Vec<(EntityId, ClassId)> = type_assertions.into_iter().collect();
        for (e, _) in &type_assertions {
            n = n.max(e.index() + 1);
        }

        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for t in &triples {
            out_adj[t.s.index()].push((t.p, t.o));
            in_adj[t.o.index()].push((t.p, t.s));
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }

        type_assertions.sort_unstable();
        type_assertions.dedup();
        let mut types = vec![Vec::new(); n];
        for (e, c) in type_assertions {
            types[e.index()].push(c);
        }

        ABoxGraph {
            triples,
            out_adj,
            in_adj,
            types,
        }
    }

    /// All triples in ascending `(s, p, o)` order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Exact adjacency of `v`; unknown entities have none.
    pub fn neighbors(&self, v: EntityId, dir: Direction) -> &[(PredicateId, EntityId)] {
        let adj = match dir {
            Direction::Forward => &self.out_adj,
            Direction::Backward => &self.in_adj,
        };
        adj.get(v.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    fn neighbors_with(&self, v: EntityId, dir: Direction, p: PredicateId) -> &[(PredicateId, EntityId)] {
        let all = self.neighbors(v, dir);
        let lo = all.partition_point(|&(q, _)| q < p);
        let hi = lo + all[lo..].partition_point(|&(q, _)| q == p);
        &all[lo..hi]
    }

    pub fn degree(&self, v: EntityId, dir: Direction) -> usize {
        self.neighbors(v, dir).len()
    }

    /// Entities with at least one asserted type, plus the asserted pairs.
    pub fn type_assertions(&self) -> impl Iterator<Item = (EntityId, ClassId)> + '_ {
        self.types
            .iter()
            .enumerate()
            .flat_map(|(e, cs)| cs.iter().map(move |&c| (EntityId(e as u32), c)))
    }

    pub fn predicates(&self) -> Vec<PredicateId> {
        let mut ps: Vec<PredicateId> = self.triples.iter().map(|t| t.p).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    pub fn triples_with_predicate(&self, p: PredicateId) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter().filter(move |t| t.p == p)
    }

    /// A copy of the graph without the given triples.
    pub fn without(&self, excluded: &HashSet<Triple>) -> ABoxGraph {
        ABoxGraph::new(
            self.types.len(),
            self.triples.iter().filter(|t| !excluded.contains(t)).copied(),
            self.type_assertions(),
        )
    }

    pub fn leave_out<'a>(&'a self, excluded: &'a HashSet<Triple>) -> LeaveOutView<'a> {
        LeaveOutView {
            graph: self,
            excluded,
        }
    }
}

impl GraphView for ABoxGraph {
    fn neighbors(&self, v: EntityId, dir: Direction) -> impl Iterator<Item = (PredicateId, EntityId)> + '_ {
        ABoxGraph::neighbors(self, v, dir).iter().copied()
    }

    fn neighbors_via(
        &self,
        v: EntityId,
        dir: Direction,
        p: PredicateId,
    ) -> impl Iterator<Item = EntityId> + '_ {
        self.neighbors_with(v, dir, p).iter().map(|&(_, e)| e)
    }

    fn contains(&self, t: &Triple) -> bool {
        self.triples.binary_search(t).is_ok()
    }

    fn types_of(&self, v: EntityId) -> &[ClassId] {
        self.types.get(v.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    fn num_entities(&self) -> usize {
        self.out_adj.len()
    }
}

/// Read-only view hiding a set of triples from every adjacency answer.
#[derive(Clone, Copy, Debug)]
pub struct LeaveOutView<'a> {
    graph: &'a ABoxGraph,
    excluded: &'a HashSet<Triple>,
}

impl LeaveOutView<'_> {
    fn hidden(&self, v: EntityId, dir: Direction, p: PredicateId, u: EntityId) -> bool {
        let t = match dir {
            Direction::Forward => Triple::new(v, p, u),
            Direction::Backward => Triple::new(u, p, v),
        };
        self.excluded.contains(&t)
    }
}

impl GraphView for LeaveOutView<'_> {
    fn neighbors(&self, v: EntityId, dir: Direction) -> impl Iterator<Item = (PredicateId, EntityId)> + '_ {
        self.graph
            .neighbors(v, dir)
            .iter()
            .copied()
            .filter(move |&(p, u)| !self.hidden(v, dir, p, u))
    }

    fn neighbors_via(
        &self,
        v: EntityId,
        dir: Direction,
        p: PredicateId,
    ) -> impl Iterator<Item = EntityId> + '_ {
        self.graph
            .neighbors_with(v, dir, p)
            .iter()
            .map(|&(_, u)| u)
            .filter(move |&u| !self.hidden(v, dir, p, u))
    }

    fn contains(&self, t: &Triple) -> bool {
        !self.excluded.contains(t) && self.graph.contains(t)
    }

    fn types_of(&self, v: EntityId) -> &[ClassId] {
        self.graph.types_of(v)
    }

    fn num_entities(&self) -> usize {
        self.graph.num_entities()
    }
}
