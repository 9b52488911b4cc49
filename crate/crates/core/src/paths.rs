// SPDX-License-Identifier: Apache-2.0

//! Data-level evidence paths: pattern-constrained DFS over the ABox with an
//! unconstrained fallback.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kg::{ClassHierarchy, Direction, EntityId, GraphView, PredicateId, Triple, Vocabulary};
use crate::patterns::SchemaPattern;

/// A triple together with the orientation it was traversed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrientedFact {
    pub triple: Triple,
    pub direction: Direction,
}

impl OrientedFact {
    pub fn entry(&self) -> EntityId {
        match self.direction {
            Direction::Forward => self.triple.s,
            Direction::Backward => self.triple.o,
        }
    }

    pub fn exit(&self) -> EntityId {
        match self.direction {
            Direction::Forward => self.triple.o,
            Direction::Backward => self.triple.s,
        }
    }

    fn traverse(from: EntityId, direction: Direction, p: PredicateId, to: EntityId) -> Self {
        let triple = match direction {
            Direction::Forward => Triple::new(from, p, to),
            Direction::Backward => Triple::new(to, p, from),
        };
        OrientedFact { triple, direction }
    }
}

/// Rank and relatedness of the pattern a path was found with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternSource {
    pub rank: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataPath {
    pub steps: Vec<OrientedFact>,
    /// `None` for paths from the unconstrained fallback.
    pub source: Option<PatternSource>,
}

impl DataPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn entities(&self) -> Vec<EntityId> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(first) = self.steps.first() {
            out.push(first.entry());
        }
        out.extend(self.steps.iter().map(OrientedFact::exit));
        out
    }

    /// `s -[p>]- e1 -[<q]- e2`
    pub fn display(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        if let Some(first) = self.steps.first() {
            out.push_str(vocab.entity_name(first.entry()));
        }
        for f in &self.steps {
            let p = vocab.predicate_name(f.triple.p);
            match f.direction {
                Direction::Forward => write!(out, " -[{p}>]- ").unwrap(),
                Direction::Backward => write!(out, " -[<{p}]- ").unwrap(),
            }
            out.push_str(vocab.entity_name(f.exit()));
        }
        out
    }

    /// Path dump line: `<len>\t<pattern score or ->\t<path>`.
    pub fn dump_line(&self, vocab: &Vocabulary) -> String {
        let score = match self.source {
            Some(src) => format!("{:.6}", src.score),
            None => "-".to_owned(),
        };
        format!("{}\t{score}\t{}", self.len(), self.display(vocab))
    }
}

/// Paths grouped by length `1..=l_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    by_length: Vec<Vec<DataPath>>,
}

impl PathSet {
    pub fn empty(l_max: usize) -> Self {
        PathSet {
            by_length: vec![Vec::new(); l_max],
        }
    }

    pub fn l_max(&self) -> usize {
        self.by_length.len()
    }

    /// Bucket of length `l` (1-based); empty when out of range.
    pub fn get(&self, l: usize) -> &[DataPath] {
        l.checked_sub(1)
            .and_then(|i| self.by_length.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn buckets(&self) -> impl Iterator<Item = (usize, &[DataPath])> {
        self.by_length.iter().enumerate().map(|(i, b)| (i + 1, b.as_slice()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataPath> {
        self.by_length.iter().flatten()
    }

    pub fn total(&self) -> usize {
        self.by_length.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn dump(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for p in self.iter() {
            out.push_str(&p.dump_line(vocab));
            out.push('\n');
        }
        out
    }
}

/// Which fallback runs when no pattern yields a path.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Fallback {
    Disabled,
    /// Simple paths over any predicate.
    #[default]
    Unconstrained,
    /// Simple paths restricted to the given predicates.
    Restricted(HashSet<PredicateId>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    pub l_max: usize,
    pub max_paths_per_length: usize,
    /// Stop a single pattern's (or the fallback's) enumeration after this many paths.
    pub enumeration_limit: usize,
    pub seed: u64,
    pub fallback: Fallback,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            l_max: 4,
            max_paths_per_length: 150,
            enumeration_limit: 100_000,
            seed: 0,
            fallback: Fallback::Unconstrained,
        }
    }
}

struct Dfs<'a, G> {
    graph: &'a G,
    target: EntityId,
    skip: Option<Triple>,
    limit: usize,
    entities: Vec<EntityId>,
    facts: Vec<OrientedFact>,
    out: Vec<Vec<OrientedFact>>,
}

impl<G: GraphView> Dfs<'_, G> {
    fn full(&self) -> bool {
        self.out.len() >= self.limit
    }

    fn visit(&mut self, fact: OrientedFact, last: bool, recurse: impl FnOnce(&mut Self)) {
        let next = fact.exit();
        if self.entities.contains(&next) || Some(fact.triple) == self.skip {
            return;
        }
        if last != (next == self.target) {
            return;
        }
        self.entities.push(next);
        self.facts.push(fact);
        if last {
            self.out.push(self.facts.clone());
        } else {
            recurse(self);
        }
        self.facts.pop();
        self.entities.pop();
    }

    fn pattern(&mut self, pattern: &SchemaPattern, hierarchy: &ClassHierarchy, depth: usize) {
        let step = pattern.steps[depth];
        let last = depth + 1 == pattern.steps.len();
        let current = *self.entities.last().unwrap();
        let graph = self.graph;
        for next in graph.neighbors_via(current, step.direction, step.predicate) {
            if self.full() {
                return;
            }
            if !hierarchy.admits(graph.types_of(next), step.to_class) {
                continue;
            }
            let fact = OrientedFact::traverse(current, step.direction, step.predicate, next);
            self.visit(fact, last, |dfs| dfs.pattern(pattern, hierarchy, depth + 1));
        }
    }

    fn free(&mut self, allowed: Option<&HashSet<PredicateId>>, max_len: usize) {
        let current = *self.entities.last().unwrap();
        let depth = self.facts.len();
        let graph = self.graph;
        for direction in [Direction::Forward, Direction::Backward] {
            for (p, next) in graph.neighbors(current, direction) {
                if self.full() {
                    return;
                }
                if allowed.is_some_and(|a| !a.contains(&p)) {
                    continue;
                }
                let fact = OrientedFact::traverse(current, direction, p, next);
                if next == self.target {
                    self.visit(fact, true, |_| {});
                } else if depth + 1 < max_len {
                    self.visit(fact, false, |dfs| dfs.free(allowed, max_len));
                }
            }
        }
    }
}

/// All simple paths from `s` to `o` complying with `pattern`: step `i`
/// follows `steps[i].predicate` in `steps[i].direction` and lands on an
/// entity admitted by `steps[i].to_class`. Deterministic order; at most
/// `limit` paths.
pub fn extract_paths_for_pattern<G: GraphView>(
    g: &G,
    hierarchy: &ClassHierarchy,
    s: EntityId,
    o: EntityId,
    pattern: &SchemaPattern,
    limit: usize,
) -> Vec<DataPath> {
    pattern_paths(g, hierarchy, s, o, pattern, None, limit)
        .into_iter()
        .map(|steps| DataPath {
            steps,
            source: None,
        })
        .collect()
}

fn pattern_paths<G: GraphView>(
    g: &G,
    hierarchy: &ClassHierarchy,
    s: EntityId,
    o: EntityId,
    pattern: &SchemaPattern,
    skip: Option<Triple>,
    limit: usize,
) -> Vec<Vec<OrientedFact>> {
    if pattern.steps.is_empty() || s == o {
        return Vec::new();
    }
    let mut dfs = Dfs {
        graph: g,
        target: o,
        skip,
        limit,
        entities: vec![s],
        facts: Vec::new(),
        out: Vec::new(),
    };
    dfs.pattern(pattern, hierarchy, 0);
    dfs.out
}

fn free_paths<G: GraphView>(
    g: &G,
    s: EntityId,
    o: EntityId,
    max_len: usize,
    allowed: Option<&HashSet<PredicateId>>,
    skip: Option<Triple>,
    limit: usize,
) -> Vec<Vec<OrientedFact>> {
    if max_len == 0 || s == o {
        return Vec::new();
    }
    let mut dfs = Dfs {
        graph: g,
        target: o,
        skip,
        limit,
        entities: vec![s],
        facts: Vec::new(),
        out: Vec::new(),
    };
    dfs.free(allowed, max_len);
    dfs.out
}

/// Keeps a seeded uniform subsample of `cap` paths, preserving order.
fn subsample(bucket: &mut Vec<DataPath>, cap: usize, rng: &mut ChaCha8Rng) {
    if bucket.len() <= cap {
        return;
    }
    let mut keep = rand::seq::index::sample(rng, bucket.len(), cap).into_vec();
    keep.sort_unstable();
    let mut taken: Vec<Option<DataPath>> = std::mem::take(bucket).into_iter().map(Some).collect();
    *bucket = keep.into_iter().map(|i| taken[i].take().unwrap()).collect();
}

fn bucketize(paths: impl IntoIterator<Item = DataPath>, cfg: &PathConfig) -> PathSet {
    let mut set = PathSet::empty(cfg.l_max);
    let mut seen: HashSet<Vec<OrientedFact>> = HashSet::new();
    for p in paths {
        let l = p.len();
        if l == 0 || l > cfg.l_max || !seen.insert(p.steps.clone()) {
            continue;
        }
        set.by_length[l - 1].push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for bucket in &mut set.by_length {
        subsample(bucket, cfg.max_paths_per_length, &mut rng);
    }
    set
}

/// Simple paths between `s` and `o` up to `cfg.l_max`, ignoring types,
/// optionally restricted to `allowed` predicates; edges are followed in
/// both directions. The triple `skip` is never traversed.
pub fn unconstrained_dfs<G: GraphView>(
    g: &G,
    s: EntityId,
    o: EntityId,
    cfg: &PathConfig,
    allowed: Option<&HashSet<PredicateId>>,
    skip: Option<Triple>,
) -> PathSet {
    let found = free_paths(g, s, o, cfg.l_max, allowed, skip, cfg.enumeration_limit);
    bucketize(
        found.into_iter().map(|steps| DataPath {
            steps,
            source: None,
        }),
        cfg,
    )
}

/// Evidence paths for `fact`, pooling pattern-compliant paths in rank
/// order. The fact's own edge is never part of the evidence. Falls back
/// according to `cfg.fallback` when every bucket is empty.
pub fn extract_paths<G: GraphView>(
    g: &G,
    hierarchy: &ClassHierarchy,
    fact: Triple,
    patterns: &[SchemaPattern],
    cfg: &PathConfig,
) -> PathSet {
    let per_pattern: Vec<Vec<DataPath>> = patterns
        .par_iter()
        .enumerate()
        .map(|(rank, pattern)| {
            if pattern.len() > cfg.l_max {
                return Vec::new();
            }
            let source = Some(PatternSource {
                rank,
                score: pattern.relatedness,
            });
            pattern_paths(g, hierarchy, fact.s, fact.o, pattern, Some(fact), cfg.enumeration_limit)
                .into_iter()
                .map(|steps| DataPath { steps, source })
                .collect()
        })
        .collect();
    let set = bucketize(per_pattern.into_iter().flatten(), cfg);
    if !set.is_empty() {
        return set;
    }
    match &cfg.fallback {
        Fallback::Disabled => set,
        Fallback::Unconstrained => unconstrained_dfs(g, fact.s, fact.o, cfg, None, Some(fact)),
        Fallback::Restricted(allowed) => unconstrained_dfs(g, fact.s, fact.o, cfg, Some(allowed), Some(fact)),
    }
}
