// SPDX-License-Identifier: Apache-2.0

//! Labeled fact benchmarks: sampled positives, type-consistent corrupted
//! negatives under the local closed world assumption, and splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{read_file, write_file, Error, Result};
use crate::kg::{ABoxGraph, ClassId, EntityId, GraphView, KnowledgeGraph, LeaveOutView, PredicateId, Triple, Vocabulary, THING};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    KgPositive,
    LcwaNegative,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledFact {
    pub triple: Triple,
    pub label: bool,
    pub origin: Origin,
}

impl LabeledFact {
    pub fn positive(triple: Triple) -> Self {
        LabeledFact {
            triple,
            label: true,
            origin: Origin::KgPositive,
        }
    }

    pub fn negative(triple: Triple) -> Self {
        LabeledFact {
            triple,
            label: false,
            origin: Origin::LcwaNegative,
        }
    }
}

fn rng_for(seed: u64, p: PredicateId, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.rotate_left(40));
    rng.set_stream(u64::from(p.0));
    rng
}

/// Uniform sample without replacement of `min(n, count)` `p`-facts, in
/// graph order.
pub fn generate_positives(g: &ABoxGraph, p: PredicateId, n: usize, seed: u64) -> Result<Vec<LabeledFact>> {
    let facts: Vec<Triple> = g.triples_with_predicate(p).copied().collect();
    if facts.is_empty() {
        return Err(Error::InvalidArgument(format!("predicate {p} has no facts")));
    }
    let n = n.min(facts.len());
    let mut picked = index::sample(&mut rng_for(seed, p, 1), facts.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| LabeledFact::positive(facts[i])).collect())
}

/// Untyped entities and entities typed only `Thing` share a type with
/// everything.
pub fn shares_type(a: &[ClassId], b: &[ClassId]) -> bool {
    let wildcard = |ts: &[ClassId]| ts.iter().all(|&c| c == THING);
    wildcard(a) || wildcard(b) || a.iter().any(|c| b.contains(c))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Subject,
    Object,
}

/// Up to `ratio` corruptions per positive. Each draw picks the subject or
/// object side uniformly among sides that still have candidates, then a
/// uniform candidate: an entity playing the same role in some `p`-fact,
/// sharing a type with the replaced entity, and yielding a triple absent
/// from `g` and not yet generated.
pub fn generate_lcwa_negatives(
    g: &ABoxGraph,
    p: PredicateId,
    positives: &[LabeledFact],
    ratio: usize,
    seed: u64,
) -> Result<Vec<LabeledFact>> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("no positives to corrupt".into()));
    }
    if let Some(bad) = positives.iter().find(|f| f.triple.p != p) {
        return Err(Error::InvalidArgument(format!(
            "positive has predicate {} but negatives were requested for {p}",
            bad.triple.p
        )));
    }
    let mut subjects: Vec<EntityId> = g.triples_with_predicate(p).map(|t| t.s).collect();
    let mut objects: Vec<EntityId> = g.triples_with_predicate(p).map(|t| t.o).collect();
    for pool in [&mut subjects, &mut objects] {
        pool.sort_unstable();
        pool.dedup();
    }
    let mut rng = rng_for(seed, p, 2);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(positives.len() * ratio);
    for pos in positives {
        let t = pos.triple;
        let candidates = |side: Side| -> Vec<Triple> {
            let (pool, replaced) = match side {
                Side::Subject => (&subjects, t.s),
                Side::Object => (&objects, t.o),
            };
            pool.iter()
                .filter(|&&e| e != replaced && shares_type(g.types_of(e), g.types_of(replaced)))
                .map(|&e| match side {
                    Side::Subject => Triple::new(e, p, t.o),
                    Side::Object => Triple::new(t.s, p, e),
                })
                .filter(|c| !GraphView::contains(g, c))
                .collect()
        };
        let mut pools = [candidates(Side::Subject), candidates(Side::Object)];
        let mut made = 0;
        while made < ratio {
            let open: Vec<usize> = (0..2).filter(|&i| !pools[i].is_empty()).collect();
            let Some(&side) = open.choose(&mut rng) else {
                break;
            };
            let pool = &mut pools[side];
            let c = pool.swap_remove(rng.gen_range(0..pool.len()));
            if seen.insert(c) {
                out.push(LabeledFact::negative(c));
                made += 1;
            }
        }
        if made < ratio {
            log::debug!("positive {t:?} yielded {made} of {ratio} negatives");
        }
    }
    Ok(out)
}

/// Train and test facts of one predicate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredicateSplit {
    pub train_pos: Vec<LabeledFact>,
    pub test_pos: Vec<LabeledFact>,
    pub train_neg: Vec<LabeledFact>,
    pub test_neg: Vec<LabeledFact>,
}

impl PredicateSplit {
    pub fn train(&self) -> impl Iterator<Item = &LabeledFact> + '_ {
        self.train_pos.iter().chain(&self.train_neg)
    }

    pub fn test(&self) -> impl Iterator<Item = &LabeledFact> + '_ {
        self.test_pos.iter().chain(&self.test_neg)
    }

    pub fn all(&self) -> impl Iterator<Item = &LabeledFact> + '_ {
        self.train().chain(self.test())
    }
}

/// Stratified seeded split; `round(n · fraction)` of each label goes to
/// training, clamped so both sides keep at least one fact.
pub fn split(positives: &[LabeledFact], negatives: &[LabeledFact], train_fraction: f64, seed: u64) -> Result<PredicateSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut part = |facts: &[LabeledFact], what: &str| -> Result<(Vec<LabeledFact>, Vec<LabeledFact>)> {
        if facts.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} {what} into train and test",
                facts.len()
            )));
        }
        let n_train = ((facts.len() as f64 * train_fraction).round() as usize).clamp(1, facts.len() - 1);
        let mut shuffled = facts.to_vec();
        shuffled.shuffle(&mut rng);
        let test = shuffled.split_off(n_train);
        Ok((shuffled, test))
    };
    let (train_pos, test_pos) = part(positives, "positives")?;
    let (train_neg, test_neg) = part(negatives, "negatives")?;
    Ok(PredicateSplit {
        train_pos,
        test_pos,
        train_neg,
        test_neg,
    })
}

/// The graph with `facts` hidden; the graph itself is not modified.
pub fn leave_out_view<'a>(g: &'a ABoxGraph, facts: &'a HashSet<Triple>) -> LeaveOutView<'a> {
    g.leave_out(facts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    /// Predicates to cover; all predicates when `None`.
    pub predicates: Option<Vec<PredicateId>>,
    /// Positives across predicates, spread proportionally to fact counts.
    pub total_positives: usize,
    pub max_per_predicate: usize,
    /// Predicates with fewer facts are skipped.
    pub min_facts: usize,
    pub neg_ratio: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            predicates: None,
            total_positives: 1000,
            max_per_predicate: 200,
            min_facts: 4,
            neg_ratio: 2,
            train_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSet {
    pub per_predicate: BTreeMap<PredicateId, PredicateSplit>,
    pub neg_ratio: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Content hash of the KG the set was built from, if known.
    pub kg_hash: Option<String>,
    pub external: bool,
}

impl BenchmarkSet {
    /// Every positive fact, for leave-out during evaluation.
    pub fn positives(&self) -> HashSet<Triple> {
        self.per_predicate
            .values()
            .flat_map(|s| s.train_pos.iter().chain(&s.test_pos))
            .filter(|f| f.label)
            .map(|f| f.triple)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.per_predicate.values().map(|s| s.all().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same facts re-split at another train fraction.
    pub fn resplit(&self, train_fraction: f64, seed: u64) -> Result<BenchmarkSet> {
        let mut per_predicate = BTreeMap::new();
        for (&p, s) in &self.per_predicate {
            let pos: Vec<LabeledFact> = s.train_pos.iter().chain(&s.test_pos).copied().collect();
            let neg: Vec<LabeledFact> = s.train_neg.iter().chain(&s.test_neg).copied().collect();
            per_predicate.insert(p, split(&pos, &neg, train_fraction, seed ^ u64::from(p.0))?);
        }
        Ok(BenchmarkSet {
            per_predicate,
            train_fraction,
            seed,
            ..self.clone()
        })
    }

    /// `<split>\t<label>\t<s>\t<p>\t<o>` lines, train before test.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for s in self.per_predicate.values() {
            for (name, facts) in [
                ("train", s.train_pos.iter().chain(&s.train_neg)),
                ("test", s.test_pos.iter().chain(&s.test_neg)),
            ] {
                for f in facts {
                    writeln!(out, "{name}\t{}\t{}", u8::from(f.label), f.triple.display(vocab)).unwrap();
                }
            }
        }
        out
    }

    pub fn manifest(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed={}", self.seed).unwrap();
        writeln!(out, "neg_ratio={}", self.neg_ratio).unwrap();
        writeln!(out, "train_fraction={}", self.train_fraction).unwrap();
        writeln!(out, "kg_hash={}", self.kg_hash.as_deref().unwrap_or("-")).unwrap();
        writeln!(out, "source={}", if self.external { "external" } else { "generated" }).unwrap();
        writeln!(out, "predicates={}", self.per_predicate.len()).unwrap();
        writeln!(out, "facts={}", self.len()).unwrap();
        out
    }

    pub fn manifest_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        write_file(path, self.to_text(vocab))?;
        write_file(&Self::manifest_path(path), self.manifest())
    }

    /// Reads a benchmark file and its manifest, resolving names in `vocab`.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let origin = path.display().to_string();
        let manifest_path = Self::manifest_path(path);
        let manifest = read_file(&manifest_path)?;
        let mut fields = BTreeMap::new();
        for line in manifest.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(manifest_path.display().to_string(), 0, format!("bad line `{line}`")))?;
            fields.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        let field = |k: &str| fields.get(k).map(String::as_str).unwrap_or("");
        let external = field("source") == "external";
        let mut per_predicate: BTreeMap<PredicateId, PredicateSplit> = BTreeMap::new();
        for (i, line) in read_file(path)?.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [split_name, label, s, p, o] = cols.as_slice() else {
                return Err(Error::parse(&origin, i + 1, "expected `<split>\\t<label>\\t<s>\\t<p>\\t<o>`"));
            };
            let label = parse_label(label).ok_or_else(|| Error::parse(&origin, i + 1, format!("bad label `{label}`")))?;
            let triple = resolve(vocab, s, p, o).map_err(|e| Error::parse(&origin, i + 1, e.to_string()))?;
            let fact = LabeledFact {
                triple,
                label,
                origin: match (external, label) {
                    (true, _) => Origin::External,
                    (false, true) => Origin::KgPositive,
                    (false, false) => Origin::LcwaNegative,
                },
            };
            let entry = per_predicate.entry(triple.p).or_default();
            let list = match (*split_name, label) {
                ("train", true) => &mut entry.train_pos,
                ("train", false) => &mut entry.train_neg,
                ("test", true) => &mut entry.test_pos,
                ("test", false) => &mut entry.test_neg,
                _ => return Err(Error::parse(&origin, i + 1, format!("bad split `{split_name}`"))),
            };
            list.push(fact);
        }
        let num = |k: &str| field(k).parse().ok();
        Ok(BenchmarkSet {
            per_predicate,
            neg_ratio: num("neg_ratio").unwrap_or(0),
            train_fraction: field("train_fraction").parse().unwrap_or(0.5),
            seed: num("seed").unwrap_or(0) as u64,
            kg_hash: fields.get("kg_hash").filter(|h| *h != "-").cloned(),
            external,
        })
    }

    /// Fails when the set was built from a different KG.
    pub fn check_hash(&self, kg: &KnowledgeGraph) -> Result<()> {
        match &self.kg_hash {
            Some(h) if *h != kg.content_hash() => Err(Error::Config(format!(
                "benchmark was built from KG {h}, but the loaded KG hashes to {}",
                kg.content_hash()
            ))),
            _ => Ok(()),
        }
    }
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

fn resolve(vocab: &Vocabulary, s: &str, p: &str, o: &str) -> Result<Triple> {
    let e = |n: &str| vocab.entity_id(n).ok_or_else(|| Error::unknown("entity", n));
    let p = vocab.predicate_id(p).ok_or_else(|| Error::unknown("predicate", p))?;
    Ok(Triple::new(e(s)?, p, e(o)?))
}

/// Reads external labeled facts in `<s>\t<p>\t<o>\t<label>` form.
pub fn parse_external(text: &str, vocab: &Vocabulary, origin: &str) -> Result<Vec<LabeledFact>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [s, p, o, label] = cols.as_slice() else {
            return Err(Error::parse(origin, i + 1, "expected `<s>\\t<p>\\t<o>\\t<label>`"));
        };
        let label = parse_label(label).ok_or_else(|| Error::parse(origin, i + 1, format!("bad label `{label}`")))?;
        let triple = resolve(vocab, s, p, o).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        out.push(LabeledFact {
            triple,
            label,
            origin: Origin::External,
        });
    }
    Ok(out)
}

/// Splits external facts per predicate.
pub fn external_benchmark(facts: &[LabeledFact], train_fraction: f64, seed: u64) -> Result<BenchmarkSet> {
    let mut by_pred: BTreeMap<PredicateId, (Vec<LabeledFact>, Vec<LabeledFact>)> = BTreeMap::new();
    for f in facts {
        let e = by_pred.entry(f.triple.p).or_default();
        if f.label { &mut e.0 } else { &mut e.1 }.push(*f);
    }
    let mut per_predicate = BTreeMap::new();
    for (p, (pos, neg)) in by_pred {
        per_predicate.insert(p, split(&pos, &neg, train_fraction, seed ^ u64::from(p.0))?);
    }
    Ok(BenchmarkSet {
        per_predicate,
        neg_ratio: 0,
        train_fraction,
        seed,
        kg_hash: None,
        external: true,
    })
}

/// Positive counts per predicate, proportional to fact counts and capped.
pub fn allocate_positives(counts: &BTreeMap<PredicateId, usize>, cfg: &BenchmarkConfig) -> BTreeMap<PredicateId, usize> {
    let total: usize = counts.values().sum();
    counts
        .iter()
        .map(|(&p, &c)| {
            let share = (cfg.total_positives as f64 * c as f64 / total.max(1) as f64).round() as usize;
            (p, share.max(2).min(cfg.max_per_predicate).min(c))
        })
        .collect()
}

/// Positives, negatives and splits for every selected predicate.
pub fn build_benchmark(kg: &KnowledgeGraph, cfg: &BenchmarkConfig) -> Result<BenchmarkSet> {
    let g = &kg.abox;
    let selected = cfg.predicates.clone().unwrap_or_else(|| g.predicates());
    let mut counts = BTreeMap::new();
    for p in selected {
        let c = g.triples_with_predicate(p).count();
        if c == 0 {
            return Err(Error::InvalidArgument(format!(
                "predicate `{}` has no facts",
                kg.vocab.predicate_name(p)
            )));
        }
        if c >= cfg.min_facts {
            counts.insert(p, c);
        } else {
            log::info!("skipping `{}`: only {c} facts", kg.vocab.predicate_name(p));
        }
    }
    let quotas = allocate_positives(&counts, cfg);
    let built: Vec<Result<Option<(PredicateId, PredicateSplit)>>> = quotas
        .par_iter()
        .map(|(&p, &n)| {
            let pos = generate_positives(g, p, n, cfg.seed)?;
            let neg = generate_lcwa_negatives(g, p, &pos, cfg.neg_ratio, cfg.seed)?;
            match split(&pos, &neg, cfg.train_fraction, cfg.seed ^ u64::from(p.0)) {
                Ok(s) => Ok(Some((p, s))),
                Err(e) => {
                    log::warn!("skipping `{}`: {e}", kg.vocab.predicate_name(p));
                    Ok(None)
                }
            }
        })
        .collect();
    let mut per_predicate = BTreeMap::new();
    for b in built {
        if let Some((p, s)) = b? {
            per_predicate.insert(p, s);
        }
    }
    if per_predicate.is_empty() {
        return Err(Error::InvalidArgument("no predicate produced a usable benchmark".into()));
    }
    Ok(BenchmarkSet {
        per_predicate,
        neg_ratio: cfg.neg_ratio,
        train_fraction: cfg.train_fraction,
        seed: cfg.seed,
        kg_hash: Some(kg.content_hash()),
        external: false,
    })
}
