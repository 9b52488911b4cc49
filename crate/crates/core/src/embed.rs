// SPDX-License-Identifier: Apache-2.0

//! Fact embeddings: skip-gram over random walks on the triple line graph, or
//! concatenation of entity and predicate vectors.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{ABoxGraph, EntityId, PredicateId, Triple, Vocabulary};
use crate::neural::sigmoid;
use crate::paths::DataPath;
use crate::relatedness::EmbeddingTable;

/// Triples as nodes, linked when they share an entity in any position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineGraph {
    adjacency: Vec<Vec<u32>>,
}

impl LineGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Node `i` of the result is `triples[i]`.
pub fn build_line_graph(triples: &[Triple]) -> LineGraph {
    let mut by_entity: HashMap<EntityId, Vec<u32>> = HashMap::new();
    for (i, t) in triples.iter().enumerate() {
        by_entity.entry(t.s).or_default().push(i as u32);
        if t.o != t.s {
            by_entity.entry(t.o).or_default().push(i as u32);
        }
    }
    let adjacency = triples
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut adj: Vec<u32> = by_entity[&t.s].clone();
            if t.o != t.s {
                adj.extend_from_slice(&by_entity[&t.o]);
            }
            adj.sort_unstable();
            adj.dedup();
            adj.retain(|&j| j as usize != i);
            adj
        })
        .collect();
    LineGraph { adjacency }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<u32>>,
    pub walks_per_node: usize,
    pub walk_length: usize,
}

impl WalkCorpus {
    pub fn num_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

/// Uniform random walks, `walks_per_node` from every node, stopping early at
/// isolated nodes. Node `i`'s walks come from its own seeded stream, so the
/// corpus does not depend on thread scheduling.
pub fn generate_walks(lg: &LineGraph, walks_per_node: usize, walk_length: usize, seed: u64) -> Result<WalkCorpus> {
    if walks_per_node == 0 || walk_length == 0 {
        return Err(Error::InvalidArgument("walks per node and walk length must be positive".into()));
    }
    let walks = (0..lg.len())
        .into_par_iter()
        .flat_map_iter(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(start as u64);
            (0..walks_per_node)
                .map(|_| {
                    let mut walk = vec![start as u32];
                    while walk.len() < walk_length {
                        let adj = lg.neighbors(*walk.last().unwrap() as usize);
                        if adj.is_empty() {
                            break;
                        }
                        walk.push(adj[rng.gen_range(0..adj.len())]);
                    }
                    walk
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(WalkCorpus {
        walks,
        walks_per_node,
        walk_length,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// 1 is deterministic; more threads update shared vectors without locks.
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramModel {
    pub dim: usize,
    /// Row-major `[nodes × dim]` input vectors; these are the embeddings.
    pub vectors: Vec<f64>,
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl SkipGramModel {
    pub fn vector(&self, node: usize) -> &[f64] {
        &self.vectors[node * self.dim..(node + 1) * self.dim]
    }
}

/// Gradients of one skip-gram pair with negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-log σ(u·v) - Σ log σ(-u·n)` and its gradients.
pub fn sgns_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGrad {
    let pos = sigmoid(dot(center, context));
    let mut loss = -pos.max(1e-300).ln();
    let g = pos - 1.0;
    let mut grad_center: Vec<f64> = context.iter().map(|v| g * v).collect();
    let grad_context = center.iter().map(|u| g * u).collect();
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let q = sigmoid(dot(center, neg));
        loss -= (1.0 - q).max(1e-300).ln();
        for (gc, n) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += q * n;
        }
        grad_negs.push(center.iter().map(|u| q * u).collect());
    }
    SgnsGrad {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negs,
    }
}

/// Shared parameter store. Relaxed atomics are plain loads and stores on the
/// usual targets, and make the multi-threaded mode sound.
struct Store {
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl Store {
    fn new(values: impl IntoIterator<Item = f64>, dim: usize) -> Self {
        Store {
            dim,
            cells: values.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
        }
    }

    fn read(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f64::from_bits(self.cells[base + k].load(Ordering::Relaxed));
        }
    }

    fn add(&self, row: usize, delta: &[f64], scale: f64) {
        let base = row * self.dim;
        for (k, d) in delta.iter().enumerate() {
            let cell = &self.cells[base + k];
            let v = f64::from_bits(cell.load(Ordering::Relaxed)) + scale * d;
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f64> {
        self.cells.into_iter().map(|c| f64::from_bits(c.into_inner())).collect()
    }
}

struct Trainer<'a> {
    cfg: &'a SkipGramConfig,
    input: Store,
    output: Store,
    noise: WeightedIndex<f64>,
    total: f64,
    processed: AtomicUsize,
}

impl Trainer<'_> {
    /// Returns summed loss and pair count.
    fn run_walks(&self, walks: &[Vec<u32>], rng: &mut ChaCha8Rng) -> (f64, usize) {
        let dim = self.cfg.dim;
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut negs = vec![vec![0.0; dim]; self.cfg.negatives];
        let mut neg_ids = Vec::with_capacity(self.cfg.negatives);
        let (mut loss, mut pairs) = (0.0, 0);
        for walk in walks {
            let done = self.processed.fetch_add(walk.len(), Ordering::Relaxed) as f64;
            let lr = self.cfg.lr * (1.0 - done / self.total).max(1e-4);
            for (i, &center) in walk.iter().enumerate() {
                let b = rng.gen_range(1..=self.cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(walk.len() - 1);
                for (j, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    neg_ids.clear();
                    for _ in 0..self.cfg.negatives {
                        let n = self.noise.sample(rng);
                        if n != ctx as usize {
                            neg_ids.push(n);
                        }
                    }
                    self.input.read(center as usize, &mut u);
                    self.output.read(ctx as usize, &mut v);
                    for (buf, &n) in negs.iter_mut().zip(&neg_ids) {
                        self.output.read(n, buf);
                    }
                    let neg_refs: Vec<&[f64]> = negs[..neg_ids.len()].iter().map(Vec::as_slice).collect();
                    let g = sgns_loss_grad(&u, &v, &neg_refs);
                    loss += g.loss;
                    pairs += 1;
                    self.output.add(ctx as usize, &g.context, -lr);
                    for (gn, &n) in g.negatives.iter().zip(&neg_ids) {
                        self.output.add(n, gn, -lr);
                    }
                    self.input.add(center as usize, &g.center, -lr);
                }
            }
        }
        (loss, pairs)
    }
}

/// Skip-gram with negative sampling over `num_nodes` tokens. Input vectors
/// start uniform in `±0.5/dim`, output vectors at zero; the learning rate
/// decays linearly over all epochs.
pub fn train_skipgram(corpus: &WalkCorpus, num_nodes: usize, cfg: &SkipGramConfig) -> Result<SkipGramModel> {
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::InvalidArgument("skip-gram dim and window must be positive".into()));
    }
    if corpus.walks.is_empty() || num_nodes == 0 {
        return Err(Error::InvalidArgument("skip-gram corpus is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / cfg.dim as f64;
    let init: Vec<f64> = (0..num_nodes * cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
    if cfg.epochs == 0 {
        return Ok(SkipGramModel {
            dim: cfg.dim,
            vectors: init,
            epoch_losses: Vec::new(),
        });
    }

    let mut counts = vec![0.0f64; num_nodes];
    for &n in corpus.walks.iter().flatten() {
        let n = n as usize;
        if n >= num_nodes {
            return Err(Error::InvalidArgument(format!("walk token {n} out of range")));
        }
        counts[n] += 1.0;
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let noise = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let trainer = Trainer {
        cfg,
        input: Store::new(init, cfg.dim),
        output: Store::new(std::iter::repeat_n(0.0, num_nodes * cfg.dim), cfg.dim),
        noise,
        total: (corpus.num_tokens() * cfg.epochs).max(1) as f64,
        processed: AtomicUsize::new(0),
    };

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..corpus.walks.len()).collect();
    for epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let walks: Vec<Vec<u32>> = order.iter().map(|&i| corpus.walks[i].clone()).collect();
        let (loss, pairs) = if cfg.threads <= 1 {
            trainer.run_walks(&walks, &mut rng)
        } else {
            let chunk = walks.len().div_ceil(cfg.threads).max(1);
            walks
                .par_chunks(chunk)
                .enumerate()
                .map(|(c, part)| {
                    let mut local = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).rotate_left(32));
                    local.set_stream(c as u64 + 1);
                    trainer.run_walks(part, &mut local)
                })
                .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        };
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        log::debug!("skip-gram epoch {}: mean loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(SkipGramModel {
        dim: cfg.dim,
        vectors: trainer.input.into_vec(),
        epoch_losses,
    })
}

/// `s ⊕ p ⊕ o`.
pub fn compose_fact_embedding(s: &[f64], p: &[f64], o: &[f64]) -> Result<Vec<f64>> {
    if p.len() != s.len() || o.len() != s.len() {
        return Err(Error::DimMismatch {
            expected: s.len(),
            got: if p.len() != s.len() { p.len() } else { o.len() },
        });
    }
    let mut out = Vec::with_capacity(3 * s.len());
    out.extend_from_slice(s);
    out.extend_from_slice(p);
    out.extend_from_slice(o);
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbeddingMode {
    #[default]
    SkipGram,
    Compositional,
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "skipgram" | "skip-gram" | "triple2vec" => Ok(EmbeddingMode::SkipGram),
            "compositional" | "concat" => Ok(EmbeddingMode::Compositional),
            _ => Err(Error::InvalidArgument(format!(
                "unknown embedding mode `{s}` (expected skipgram or compositional)"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMode::SkipGram => "skipgram",
            EmbeddingMode::Compositional => "compositional",
        })
    }
}

/// Per-triple vectors with an averaging fallback for triples never seen in
/// training.
#[derive(Clone, Debug, PartialEq)]
pub struct FactTable {
    dim: usize,
    triples: Vec<Triple>,
    index: HashMap<Triple, usize>,
    data: Vec<f64>,
    by_entity: HashMap<EntityId, Vec<u32>>,
    by_predicate: HashMap<PredicateId, Vec<u32>>,
    global_mean: Vec<f64>,
}

impl FactTable {
    pub fn new(dim: usize, rows: Vec<(Triple, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("fact dimension must be positive".into()));
        }
        let mut table = FactTable {
            dim,
            triples: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            by_entity: HashMap::new(),
            by_predicate: HashMap::new(),
            global_mean: vec![0.0; dim],
        };
        for (t, v) in rows {
            if v.len() != dim {
                return Err(Error::DimMismatch { expected: dim, got: v.len() });
            }
            if table.index.contains_key(&t) {
                continue;
            }
            let row = table.triples.len() as u32;
            table.index.insert(t, row as usize);
            table.triples.push(t);
            table.by_entity.entry(t.s).or_default().push(row);
            if t.o != t.s {
                table.by_entity.entry(t.o).or_default().push(row);
            }
            table.by_predicate.entry(t.p).or_default().push(row);
            for (g, x) in table.global_mean.iter_mut().zip(&v) {
                *g += x;
            }
            table.data.extend(v);
        }
        if !table.triples.is_empty() {
            let n = table.triples.len() as f64;
            table.global_mean.iter_mut().for_each(|g| *g /= n);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn get(&self, t: &Triple) -> Option<&[f64]> {
        self.index.get(t).map(|&r| self.row(r))
    }

    /// Mean over stored facts sharing `t`'s subject, predicate or object,
    /// else the mean of all facts.
    pub fn fallback(&self, t: &Triple) -> Vec<f64> {
        let mut rows: Vec<u32> = Vec::new();
        for e in [t.s, t.o] {
            rows.extend(self.by_entity.get(&e).into_iter().flatten());
        }
        rows.extend(self.by_predicate.get(&t.p).into_iter().flatten());
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            return self.global_mean.clone();
        }
        let mut out = vec![0.0; self.dim];
        for &r in &rows {
            for (o, x) in out.iter_mut().zip(self.row(r as usize)) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= rows.len() as f64);
        out
    }

    /// Mean vector of the facts each entity takes part in.
    pub fn entity_means(&self) -> HashMap<EntityId, Vec<f64>> {
        mean_rows(&self.by_entity, self)
    }

    /// Mean vector of each predicate's facts.
    pub fn predicate_means(&self) -> HashMap<PredicateId, Vec<f64>> {
        mean_rows(&self.by_predicate, self)
    }
}

fn mean_rows<K: Copy + Eq + std::hash::Hash>(groups: &HashMap<K, Vec<u32>>, t: &FactTable) -> HashMap<K, Vec<f64>> {
    groups
        .iter()
        .map(|(&k, rows)| {
            let mut out = vec![0.0; t.dim];
            for &r in rows {
                for (o, x) in out.iter_mut().zip(t.row(r as usize)) {
                    *o += x;
                }
            }
            out.iter_mut().for_each(|o| *o /= rows.len() as f64);
            (k, out)
        })
        .collect()
}

/// Entity and predicate vectors for the concatenation mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentTables {
    pub dim: usize,
    pub entities: HashMap<EntityId, Vec<f64>>,
    pub predicates: HashMap<PredicateId, Vec<f64>>,
}

const ENTITY_PREFIX: &str = "entity:";
const PREDICATE_PREFIX: &str = "predicate:";

#[derive(Clone, Debug, PartialEq)]
pub enum FactEmbedder {
    SkipGram(FactTable),
    Compositional(ComponentTables),
}

impl FactEmbedder {
    pub fn mode(&self) -> EmbeddingMode {
        match self {
            FactEmbedder::SkipGram(_) => EmbeddingMode::SkipGram,
            FactEmbedder::Compositional(_) => EmbeddingMode::Compositional,
        }
    }

    pub fn fact_dim(&self) -> usize {
        match self {
            FactEmbedder::SkipGram(t) => t.dim,
            FactEmbedder::Compositional(c) => 3 * c.dim,
        }
    }

    pub fn embed(&self, t: &Triple, vocab: &Vocabulary) -> Result<Cow<'_, [f64]>> {
        match self {
            FactEmbedder::SkipGram(table) => Ok(match table.get(t) {
                Some(v) => Cow::Borrowed(v),
                None => Cow::Owned(table.fallback(t)),
            }),
            FactEmbedder::Compositional(c) => {
                let entity = |e: EntityId| {
                    c.entities
                        .get(&e)
                        .ok_or_else(|| Error::unknown("entity vector", vocab.entity_name(e)))
                };
                let p = c
                    .predicates
                    .get(&t.p)
                    .ok_or_else(|| Error::unknown("predicate vector", vocab.predicate_name(t.p)))?;
                compose_fact_embedding(entity(t.s)?, p, entity(t.o)?).map(Cow::Owned)
            }
        }
    }

    /// One vector per step; orientation does not change a fact's vector.
    pub fn embed_path(&self, path: &DataPath, vocab: &Vocabulary) -> Result<Vec<Vec<f64>>> {
        path.steps
            .iter()
            .map(|f| self.embed(&f.triple, vocab).map(Cow::into_owned))
            .collect()
    }

    /// Predicate vectors for building the relatedness matrix.
    pub fn predicate_table(&self, vocab: &Vocabulary) -> Result<EmbeddingTable> {
        let (dim, preds) = match self {
            FactEmbedder::SkipGram(t) => (t.dim, t.predicate_means()),
            FactEmbedder::Compositional(c) => (c.dim, c.predicates.clone()),
        };
        let mut sorted: Vec<_> = preds.into_iter().collect();
        sorted.sort_by_key(|(p, _)| *p);
        let mut table = EmbeddingTable::new(dim)?;
        for (p, v) in sorted {
            table.insert(vocab.predicate_name(p), &v)?;
        }
        Ok(table)
    }

    /// Skip-gram keys are `s|p|o`; component keys carry `entity:` or
    /// `predicate:` prefixes.
    pub fn to_table(&self, vocab: &Vocabulary) -> Result<EmbeddingTable> {
        match self {
            FactEmbedder::SkipGram(t) => {
                let mut table = EmbeddingTable::new(t.dim)?;
                for (r, tr) in t.triples.iter().enumerate() {
                    let key = format!(
                        "{}|{}|{}",
                        vocab.entity_name(tr.s),
                        vocab.predicate_name(tr.p),
                        vocab.entity_name(tr.o)
                    );
                    table.insert(&key, t.row(r))?;
                }
                Ok(table)
            }
            FactEmbedder::Compositional(c) => {
                let mut table = EmbeddingTable::new(c.dim)?;
                let mut ents: Vec<_> = c.entities.iter().collect();
                ents.sort_by_key(|(e, _)| **e);
                for (e, v) in ents {
                    table.insert(&format!("{ENTITY_PREFIX}{}", vocab.entity_name(*e)), v)?;
                }
                let mut preds: Vec<_> = c.predicates.iter().collect();
                preds.sort_by_key(|(p, _)| **p);
                for (p, v) in preds {
                    table.insert(&format!("{PREDICATE_PREFIX}{}", vocab.predicate_name(*p)), v)?;
                }
                Ok(table)
            }
        }
    }

    /// Inverse of [`FactEmbedder::to_table`]. Keys naming unknown entities or
    /// predicates are skipped with a warning.
    pub fn from_table(mode: EmbeddingMode, table: &EmbeddingTable, vocab: &Vocabulary) -> Result<Self> {
        let mut skipped = 0usize;
        match mode {
            EmbeddingMode::SkipGram => {
                let mut rows = Vec::with_capacity(table.len());
                for key in table.keys() {
                    let parts: Vec<&str> = key.splitn(3, '|').collect();
                    let triple = match parts.as_slice() {
                        [s, p, o] => match (vocab.entity_id(s), vocab.predicate_id(p), vocab.entity_id(o)) {
                            (Some(s), Some(p), Some(o)) => Some(Triple::new(s, p, o)),
                            _ => None,
                        },
                        _ => None,
                    };
                    match triple {
                        Some(t) => rows.push((t, table.get(key).unwrap().to_vec())),
                        None => skipped += 1,
                    }
                }
                if skipped > 0 {
                    log::warn!("skipped {skipped} fact vectors with unknown or malformed keys");
                }
                Ok(FactEmbedder::SkipGram(FactTable::new(table.dim(), rows)?))
            }
            EmbeddingMode::Compositional => {
                let mut c = ComponentTables {
                    dim: table.dim(),
                    entities: HashMap::new(),
                    predicates: HashMap::new(),
                };
                for key in table.keys() {
                    let v = table.get(key).unwrap().to_vec();
                    if let Some(id) = key.strip_prefix(ENTITY_PREFIX).and_then(|n| vocab.entity_id(n)) {
                        c.entities.insert(id, v);
                    } else if let Some(id) = key.strip_prefix(PREDICATE_PREFIX).and_then(|n| vocab.predicate_id(n)) {
                        c.predicates.insert(id, v);
                    } else {
                        skipped += 1;
                    }
                }
                if skipped > 0 {
                    log::warn!("skipped {skipped} component vectors with unknown keys");
                }
                Ok(FactEmbedder::Compositional(c))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedConfig {
    pub mode: EmbeddingMode,
    /// Fact dimension in skip-gram mode, component dimension otherwise.
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub skipgram: SkipGramConfig,
}

impl EmbedConfig {
    pub fn new(mode: EmbeddingMode) -> Self {
        EmbedConfig {
            mode,
            dim: match mode {
                EmbeddingMode::SkipGram => 128,
                EmbeddingMode::Compositional => 64,
            },
            walks_per_node: 10,
            walk_length: 20,
            skipgram: SkipGramConfig::default(),
        }
    }
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig::new(EmbeddingMode::SkipGram)
    }
}

/// Trains fact vectors on `abox`. Compositional mode derives entity and
/// predicate vectors as means of the skip-gram fact vectors they occur in.
pub fn train_fact_embedder(abox: &ABoxGraph, cfg: &EmbedConfig) -> Result<(FactEmbedder, Vec<f64>)> {
    let triples = abox.triples();
    if triples.is_empty() {
        return Err(Error::InvalidArgument("cannot embed an empty graph".into()));
    }
    let lg = build_line_graph(triples);
    let corpus = generate_walks(&lg, cfg.walks_per_node, cfg.walk_length, cfg.skipgram.seed)?;
    let sg = SkipGramConfig {
        dim: cfg.dim,
        ..cfg.skipgram.clone()
    };
    let model = train_skipgram(&corpus, lg.len(), &sg)?;
    let rows = triples
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, model.vector(i).to_vec()))
        .collect();
    let table = FactTable::new(cfg.dim, rows)?;
    let embedder = match cfg.mode {
        EmbeddingMode::SkipGram => FactEmbedder::SkipGram(table),
        EmbeddingMode::Compositional => FactEmbedder::Compositional(ComponentTables {
            dim: cfg.dim,
            entities: table.entity_means(),
            predicates: table.predicate_means(),
        }),
    };
    Ok((embedder, model.epoch_losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Direction, KnowledgeGraph};
    use crate::paths::OrientedFact;
    use crate::relatedness::cosine;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn t(s: u32, p: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), PredicateId(p), EntityId(o))
    }

    fn pairwise_oracle(triples: &[Triple]) -> Vec<Vec<u32>> {
        (0..triples.len())
            .map(|i| {
                (0..triples.len())
                    .filter(|&j| {
                        let (a, b) = (triples[i], triples[j]);
                        j != i && [a.s, a.o].iter().any(|e| *e == b.s || *e == b.o)
                    })
                    .map(|j| j as u32)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn line_graph_examples() {
        assert_eq!(build_line_graph(&[t(0, 0, 1), t(2, 0, 1)]).num_edges(), 1);
        assert_eq!(build_line_graph(&[t(0, 0, 1), t(1, 0, 2), t(2, 0, 0)]).num_edges(), 3);
        let lg = build_line_graph(&[t(0, 0, 1), t(2, 0, 3)]);
        assert_eq!(lg.num_edges(), 0);
    }

    #[test]
    fn movie_line_graph_matches_pairwise_oracle() {
        let kg = KnowledgeGraph::from_records(&crate::kg::parse_tsv(MOVIES, "m").unwrap(), &[]).unwrap();
        let triples = kg.abox.triples();
        let lg = build_line_graph(triples);
        assert_eq!(lg.len(), triples.len());
        for (i, want) in pairwise_oracle(triples).into_iter().enumerate() {
            assert_eq!(lg.neighbors(i), want.as_slice());
        }
    }

    const MOVIES: &str = "Dune\tstarring\tJ_Nance\n\
        Eraserhead\tstarring\tJ_Nance\n\
        Eraserhead\tdirector\tD_Lynch\n\
        Dune\tdirector\tD_Lynch\n\
        Dune\tcinematography\tF_Francis\n\
        Barry_Lyndon\tdirector\tS_Kubrick\n";

    #[test]
    fn walks_basic_shapes() {
        let lg = build_line_graph(&[t(0, 0, 1), t(5, 0, 6)]);
        let c = generate_walks(&lg, 3, 5, 1).unwrap();
        assert!(c.walks.iter().all(|w| w.len() == 1));
        assert_eq!(c.walks.len(), 6);

        let lg = build_line_graph(&[t(0, 0, 1), t(1, 0, 2)]);
        let c = generate_walks(&lg, 2, 3, 1).unwrap();
        assert!(c.walks.contains(&vec![0, 1, 0]));
        assert!(c.walks.contains(&vec![1, 0, 1]));
        assert!(generate_walks(&lg, 0, 3, 1).is_err());
        assert_eq!(c, generate_walks(&lg, 2, 3, 1).unwrap());
    }

    #[test]
    fn walk_transitions_are_uniform() {
        // Star-ish graph: node 0 shares entity 1 with nodes 1, 2; node 3 links to 2 only.
        let triples = [t(0, 0, 1), t(1, 0, 2), t(1, 1, 3), t(3, 0, 4)];
        let lg = build_line_graph(&triples);
        let corpus = generate_walks(&lg, 500, 60, 7).unwrap();
        let mut counts = vec![vec![0usize; lg.len()]; lg.len()];
        for w in &corpus.walks {
            for pair in w.windows(2) {
                counts[pair[0] as usize][pair[1] as usize] += 1;
            }
        }
        let steps: usize = counts.iter().flatten().sum();
        assert!(steps >= 100_000);
        for (i, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            let deg = lg.neighbors(i).len() as f64;
            for &j in lg.neighbors(i) {
                let freq = row[j as usize] as f64 / total as f64;
                assert!((freq - 1.0 / deg).abs() < 0.02, "{i}->{j}: {freq}");
            }
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn sgns_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for _ in 0..100 {
            let dim = 6;
            let mut vecs: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let loss = |v: &[Vec<f64>]| sgns_loss_grad(&v[0], &v[1], &[&v[2]]).loss;
            let g = sgns_loss_grad(&vecs[0], &vecs[1], &[&vecs[2]]);
            let analytic = [&g.center, &g.context, &g.negatives[0]];
            for which in 0..3 {
                for k in 0..dim {
                    let orig = vecs[which][k];
                    vecs[which][k] = orig + h;
                    let up = loss(&vecs);
                    vecs[which][k] = orig - h;
                    let down = loss(&vecs);
                    vecs[which][k] = orig;
                    let fd = (up - down) / (2.0 * h);
                    assert!(rel_err(fd, analytic[which][k]) < 1e-5, "{fd} vs {}", analytic[which][k]);
                }
            }
        }
    }

    fn three_components() -> (LineGraph, Vec<Triple>) {
        let mut triples = Vec::new();
        for c in 0..3u32 {
            let base = c * 10;
            for k in 0..4 {
                triples.push(t(base, k, base + 1 + k));
            }
        }
        (build_line_graph(&triples), triples)
    }

    #[test]
    fn co_occurring_facts_end_up_closer() {
        let (lg, _) = three_components();
        let corpus = generate_walks(&lg, 20, 20, 3).unwrap();
        let cfg = SkipGramConfig {
            dim: 16,
            epochs: 10,
            ..SkipGramConfig::default()
        };
        let m = train_skipgram(&corpus, lg.len(), &cfg).unwrap();
        assert!(m.epoch_losses.last().unwrap() < m.epoch_losses.first().unwrap());
        let within = cosine(m.vector(0), m.vector(1)).unwrap();
        let across = cosine(m.vector(0), m.vector(8)).unwrap();
        assert!(within > across, "{within} vs {across}");
    }

    #[test]
    fn zero_epochs_keeps_initial_vectors_and_training_is_seeded() {
        let (lg, _) = three_components();
        let corpus = generate_walks(&lg, 2, 5, 3).unwrap();
        let cfg = SkipGramConfig {
            dim: 4,
            epochs: 0,
            ..SkipGramConfig::default()
        };
        let a = train_skipgram(&corpus, lg.len(), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init: Vec<f64> = (0..lg.len() * 4).map(|_| rng.gen_range(-0.125..0.125)).collect();
        assert_eq!(a.vectors, init);
        assert!(a.epoch_losses.is_empty());

        let cfg = SkipGramConfig { epochs: 2, ..cfg };
        assert_eq!(
            train_skipgram(&corpus, lg.len(), &cfg).unwrap(),
            train_skipgram(&corpus, lg.len(), &cfg).unwrap()
        );
        let bad = SkipGramConfig { window: 0, ..cfg };
        assert!(train_skipgram(&corpus, lg.len(), &bad).is_err());
    }

    #[test]
    fn multi_threaded_training_still_learns() {
        let (lg, _) = three_components();
        let corpus = generate_walks(&lg, 20, 20, 3).unwrap();
        let cfg = SkipGramConfig {
            dim: 16,
            epochs: 5,
            threads: 4,
            ..SkipGramConfig::default()
        };
        let m = train_skipgram(&corpus, lg.len(), &cfg).unwrap();
        assert!(m.vectors.iter().all(|x| x.is_finite()));
        assert!(m.epoch_losses.last().unwrap() < m.epoch_losses.first().unwrap());
    }

    #[test]
    fn composition_examples() {
        assert_eq!(
            compose_fact_embedding(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
        assert_eq!(compose_fact_embedding(&[0.0; 3], &[0.0; 3], &[0.0; 3]).unwrap(), vec![0.0; 9]);
        assert!(compose_fact_embedding(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn fallback_averages_neighbouring_facts() {
        let table = FactTable::new(
            1,
            vec![(t(0, 0, 1), vec![1.0]), (t(2, 1, 3), vec![3.0]), (t(4, 2, 5), vec![8.0])],
        )
        .unwrap();
        assert_eq!(table.fallback(&t(0, 1, 9)), vec![2.0]);
        assert_eq!(table.fallback(&t(7, 9, 9)), vec![4.0]);
        assert_eq!(table.get(&t(2, 1, 3)), Some(&[3.0][..]));
    }

    fn movie_embedder(mode: EmbeddingMode) -> (KnowledgeGraph, FactEmbedder) {
        let kg = KnowledgeGraph::from_records(&crate::kg::parse_tsv(MOVIES, "m").unwrap(), &[]).unwrap();
        let mut cfg = EmbedConfig::new(mode);
        cfg.dim = 8;
        cfg.walks_per_node = 4;
        cfg.walk_length = 6;
        let (emb, _) = train_fact_embedder(&kg.abox, &cfg).unwrap();
        (kg, emb)
    }

    #[test]
    fn path_embedding_matches_lookups() {
        for mode in [EmbeddingMode::SkipGram, EmbeddingMode::Compositional] {
            let (kg, emb) = movie_embedder(mode);
            let step = |s, p, o, d| OrientedFact {
                triple: kg.triple(s, p, o).unwrap(),
                direction: d,
            };
            let path = DataPath {
                steps: vec![
                    step("Dune", "starring", "J_Nance", Direction::Forward),
                    step("Eraserhead", "starring", "J_Nance", Direction::Backward),
                    step("Eraserhead", "director", "D_Lynch", Direction::Forward),
                ],
                source: None,
            };
            let vs = emb.embed_path(&path, &kg.vocab).unwrap();
            assert_eq!(vs.len(), 3);
            for (v, f) in vs.iter().zip(&path.steps) {
                assert_eq!(v.as_slice(), &*emb.embed(&f.triple, &kg.vocab).unwrap());
                assert_eq!(v.len(), emb.fact_dim());
            }
            let short = DataPath {
                steps: path.steps[..1].to_vec(),
                source: None,
            };
            assert_eq!(emb.embed_path(&short, &kg.vocab).unwrap()[0], vs[0]);
        }
    }

    #[test]
    fn embedder_table_round_trip() {
        for mode in [EmbeddingMode::SkipGram, EmbeddingMode::Compositional] {
            let (kg, emb) = movie_embedder(mode);
            let text = emb.to_table(&kg.vocab).unwrap().to_text();
            let back = FactEmbedder::from_table(mode, &EmbeddingTable::parse(&text, "t").unwrap(), &kg.vocab).unwrap();
            assert_eq!(back, emb);
            assert_eq!(emb.predicate_table(&kg.vocab).unwrap().len(), 3);
        }
    }

    #[test]
    fn compositional_missing_vector_names_key() {
        let (kg, FactEmbedder::Compositional(mut c)) = movie_embedder(EmbeddingMode::Compositional) else {
            unreachable!()
        };
        let dune = kg.entity("Dune").unwrap();
        c.entities.remove(&dune);
        let emb = FactEmbedder::Compositional(c);
        let err = emb.embed(&kg.triple("Dune", "director", "D_Lynch").unwrap(), &kg.vocab).unwrap_err();
        assert!(err.to_string().contains("Dune"));
    }

    proptest! {
        #[test]
        fn line_graph_is_symmetric(edges in proptest::collection::vec((0u32..8, 0u32..3, 0u32..8), 0..25)) {
            let triples: Vec<Triple> = edges.iter().map(|&(s, p, o)| t(s, p, o)).collect();
            let lg = build_line_graph(&triples);
            prop_assert_eq!(lg.len(), triples.len());
            for i in 0..lg.len() {
                for &j in lg.neighbors(i) {
                    prop_assert!(lg.neighbors(j as usize).contains(&(i as u32)));
                }
            }
        }

        #[test]
        fn composition_slices_reproduce_inputs(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let out = compose_fact_embedding(&v[0..4], &v[4..8], &v[8..12]).unwrap();
            prop_assert_eq!(out, v);
        }
    }
}
