// SPDX-License-Identifier: Apache-2.0

//! Relatedness-guided search for schema-level patterns.
//!
//! A pattern is a walk over the schema graph, read as undirected: it starts
//! at a class compatible with a domain of the target predicate and ends at a
//! class below one of its ranges. Only the top-k predicates most related to
//! the target may be traversed. subClassOf edges are free: a step may leave
//! from any class comparable with the current one in the closed hierarchy,
//! and they never count towards the pattern length.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{read_file, write_file, Error, Result};
use crate::kg::{ClassHierarchy, ClassId, Direction, EdgeLabel, PredicateId, TBoxGraph, Vocabulary, THING};
use crate::relatedness::{path_relatedness, top_k_predicates, RelatednessMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternStep {
    pub direction: Direction,
    pub predicate: PredicateId,
    pub to_class: ClassId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemaPattern {
    pub start_class: ClassId,
    pub steps: Vec<PatternStep>,
    pub relatedness: f64,
}

impl SchemaPattern {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end_class(&self) -> ClassId {
        self.steps.last().map_or(self.start_class, |s| s.to_class)
    }

    pub fn predicates(&self) -> Vec<PredicateId> {
        self.steps.iter().map(|s| s.predicate).collect()
    }

    /// Queue order: relatedness descending, then shorter first, then the
    /// step encoding.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .relatedness
            .total_cmp(&self.relatedness)
            .then(self.steps.len().cmp(&other.steps.len()))
            .then(self.start_class.cmp(&other.start_class))
            .then_with(|| self.steps.cmp(&other.steps))
    }

    /// `Work -[starring>]- Actor -[<starring]- Work`
    pub fn display(&self, vocab: &Vocabulary) -> String {
        let mut out = vocab.class_name(self.start_class).to_owned();
        for s in &self.steps {
            let p = vocab.predicate_name(s.predicate);
            match s.direction {
                Direction::Forward => write!(out, " -[{p}>]- ").unwrap(),
                Direction::Backward => write!(out, " -[<{p}]- ").unwrap(),
            }
            out.push_str(vocab.class_name(s.to_class));
        }
        out
    }
}

struct Ranked(SchemaPattern);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // Heap top = worst-ranked pattern, so it can be evicted.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

/// Bounded priority queue keeping the `cap` best-ranked patterns.
pub struct PatternQueue {
    cap: usize,
    heap: BinaryHeap<Ranked>,
}

impl PatternQueue {
    pub fn new(cap: usize) -> Self {
        PatternQueue {
            cap,
            heap: BinaryHeap::new(),
        }
    }

    pub fn push(&mut self, pattern: SchemaPattern) {
        if self.cap == 0 {
            return;
        }
        if self.heap.len() < self.cap {
            self.heap.push(Ranked(pattern));
        } else if let Some(worst) = self.heap.peek() {
            if pattern.rank_cmp(&worst.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(Ranked(pattern));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Best first.
    pub fn into_sorted_vec(self) -> Vec<SchemaPattern> {
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

/// True iff the pattern's terminal class lies below (or equals) a range.
pub fn check_range(pattern: &SchemaPattern, ranges: &BTreeSet<ClassId>, hierarchy: &ClassHierarchy) -> bool {
    let end = pattern.end_class();
    ranges.iter().any(|&r| hierarchy.is_subclass_or_eq(end, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatternSearch {
    pub k: usize,
    pub max_len: usize,
    pub cap: usize,
}

impl Default for PatternSearch {
    fn default() -> Self {
        PatternSearch {
            k: 10,
            max_len: 4,
            cap: 50,
        }
    }
}

#[derive(Clone)]
struct Partial {
    start: ClassId,
    steps: Vec<PatternStep>,
}

impl Partial {
    fn end(&self) -> ClassId {
        self.steps.last().map_or(self.start, |s| s.to_class)
    }

    fn uses(&self, from: ClassId, step: PatternStep) -> bool {
        let mut cur = self.start;
        for s in &self.steps {
            if cur == from && *s == step {
                return true;
            }
            cur = s.to_class;
        }
        false
    }
}

/// Oriented traversals leaving any class comparable with `class`.
fn expansions(
    gs: &TBoxGraph,
    allowed: &HashSet<PredicateId>,
    comparable: &[ClassId],
) -> Vec<PatternStep> {
    let mut steps = BTreeSet::new();
    for &c in comparable {
        for e in gs.outgoing(c) {
            if let EdgeLabel::Property(q) = e.label {
                if allowed.contains(&q) {
                    steps.insert(PatternStep {
                        direction: Direction::Forward,
                        predicate: q,
                        to_class: e.to,
                    });
                }
            }
        }
        for e in gs.incoming(c) {
            if let EdgeLabel::Property(q) = e.label {
                if allowed.contains(&q) {
                    steps.insert(PatternStep {
                        direction: Direction::Backward,
                        predicate: q,
                        to_class: e.from,
                    });
                }
            }
        }
    }
    steps.into_iter().collect()
}

fn comparable_classes(gs: &TBoxGraph, class: ClassId) -> Vec<ClassId> {
    let h = gs.hierarchy();
    gs.nodes().iter().copied().filter(|&c| h.comparable(class, c)).collect()
}

/// Schema-level patterns for `target`, best first, at most `search.cap`.
pub fn extract_schema_patterns(
    target: PredicateId,
    search: PatternSearch,
    gs: &TBoxGraph,
    m: &RelatednessMatrix,
) -> Result<Vec<SchemaPattern>> {
    if search.max_len == 0 {
        return Err(Error::InvalidArgument("maximum pattern length must be at least 1".into()));
    }
    let related = top_k_predicates(m, target, search.k)?;
    let allowed: HashSet<PredicateId> = related.iter().copied().collect();
    let thing = BTreeSet::from([THING]);
    let domains = gs.domains_of(target).unwrap_or(&thing);
    let ranges = gs.ranges_of(target).unwrap_or(&thing);
    let h = gs.hierarchy();
    let start_ok = |c: ClassId| domains.iter().any(|&d| h.comparable(c, d));

    let comparable: std::collections::HashMap<ClassId, Vec<ClassId>> = gs
        .nodes()
        .iter()
        .map(|&c| (c, comparable_classes(gs, c)))
        .collect();

    // Seeds are grouped by first predicate so the searches run independently.
    let per_seed: Vec<Result<Vec<SchemaPattern>>> = related
        .par_iter()
        .map(|&seed| {
            let mut layer: Vec<Partial> = Vec::new();
            let mut seen = HashSet::new();
            for e in gs.property_edges() {
                if e.label != EdgeLabel::Property(seed) {
                    continue;
                }
                for (start, direction, to_class) in
                    [(e.from, Direction::Forward, e.to), (e.to, Direction::Backward, e.from)]
                {
                    if !start_ok(start) {
                        continue;
                    }
                    let step = PatternStep {
                        direction,
                        predicate: seed,
                        to_class,
                    };
                    if seen.insert((start, step)) {
                        layer.push(Partial {
                            start,
                            steps: vec![step],
                        });
                    }
                }
            }

            let mut admitted = Vec::new();
            let mut step_cache: std::collections::HashMap<ClassId, Vec<PatternStep>> = std::collections::HashMap::new();
            for depth in 1..=search.max_len {
                for partial in &layer {
                    let candidate = SchemaPattern {
                        start_class: partial.start,
                        steps: partial.steps.clone(),
                        relatedness: 0.0,
                    };
                    if check_range(&candidate, ranges, h) {
                        let relatedness = path_relatedness(target, &candidate.predicates(), m)?;
                        admitted.push(SchemaPattern {
                            relatedness,
                            ..candidate
                        });
                    }
                }
                if depth == search.max_len {
                    break;
                }
                // Parents are distinct and options are a set, so children are too.
                let mut next = Vec::new();
                for partial in &layer {
                    let end = partial.end();
                    let options = step_cache.entry(end).or_insert_with(|| match comparable.get(&end) {
                        Some(cs) => expansions(gs, &allowed, cs),
                        None => expansions(gs, &allowed, &comparable_classes(gs, end)),
                    });
                    for &step in options.iter() {
                        if partial.uses(end, step) {
                            continue;
                        }
                        let mut steps = partial.steps.clone();
                        steps.push(step);
                        next.push(Partial {
                            start: partial.start,
                            steps,
                        });
                    }
                }
                layer = next;
            }
            Ok(admitted)
        })
        .collect();

    let mut queue = PatternQueue::new(search.cap);
    for batch in per_seed {
        for p in batch? {
            queue.push(p);
        }
    }
    Ok(queue.into_sorted_vec())
}

/// One pattern per line: `<score>\t<start>\t(<dir>,<pred>,<class>)...`,
/// steps tab-separated, `>` forward and `<` backward.
pub fn patterns_to_text(patterns: &[SchemaPattern], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for p in patterns {
        write!(out, "{}\t{}", p.relatedness, vocab.class_name(p.start_class)).unwrap();
        for s in &p.steps {
            let dir = match s.direction {
                Direction::Forward => '>',
                Direction::Backward => '<',
            };
            write!(
                out,
                "\t({dir},{},{})",
                vocab.predicate_name(s.predicate),
                vocab.class_name(s.to_class)
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_step(field: &str, vocab: &Vocabulary) -> Option<PatternStep> {
    let inner = field.strip_prefix('(')?.strip_suffix(')')?;
    let (dir, rest) = inner.split_once(',')?;
    let direction = match dir {
        ">" => Direction::Forward,
        "<" => Direction::Backward,
        _ => return None,
    };
    // Names may contain commas; take the split that names a known
    // predicate and a known class.
    rest.match_indices(',').find_map(|(i, _)| {
        let predicate = vocab.predicate_id(&rest[..i])?;
        let to_class = vocab.class_id(&rest[i + 1..])?;
        Some(PatternStep {
            direction,
            predicate,
            to_class,
        })
    })
}

pub fn patterns_from_text(text: &str, vocab: &Vocabulary, origin: &str) -> Result<Vec<SchemaPattern>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(origin, idx + 1, m);
        let mut fields = line.split('\t');
        let relatedness: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| err("bad score".into()))?;
        let start = fields.next().ok_or_else(|| err("missing start class".into()))?;
        let start_class = vocab
            .class_id(start)
            .ok_or_else(|| err(format!("unknown class `{start}`")))?;
        let steps = fields
            .map(|f| parse_step(f, vocab).ok_or_else(|| err(format!("bad step `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        if steps.is_empty() {
            return Err(err("pattern has no steps".into()));
        }
        out.push(SchemaPattern {
            start_class,
            steps,
            relatedness,
        });
    }
    Ok(out)
}

/// On-disk per-predicate pattern lists keyed by `(p, k, d, matrix hash)`.
#[derive(Clone, Debug)]
pub struct PatternCache {
    dir: PathBuf,
}

impl PatternCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PatternCache { dir: dir.into() }
    }

    pub fn path_for(&self, predicate: &str, search: &PatternSearch, matrix_hash: &str) -> PathBuf {
        let slug: String = predicate
            .chars()
            .rev()
            .take(32)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let name_hash = hex::encode(&Sha256::digest(predicate.as_bytes())[..4]);
        self.dir.join(format!(
            "{slug}-{name_hash}-k{}-d{}-c{}-{matrix_hash}.tsv",
            search.k, search.max_len, search.cap
        ))
    }

    pub fn get_or_compute(
        &self,
        target: PredicateId,
        search: PatternSearch,
        gs: &TBoxGraph,
        m: &RelatednessMatrix,
        vocab: &Vocabulary,
    ) -> Result<Vec<SchemaPattern>> {
        let path = self.path_for(vocab.predicate_name(target), &search, &m.hash(vocab));
        if path.exists() {
            return load_patterns(&path, vocab);
        }
        let patterns = extract_schema_patterns(target, search, gs, m)?;
        write_file(&path, patterns_to_text(&patterns, vocab))?;
        Ok(patterns)
    }
}

pub fn load_patterns(path: &Path, vocab: &Vocabulary) -> Result<Vec<SchemaPattern>> {
    patterns_from_text(&read_file(path)?, vocab, &path.display().to_string())
}
