// SPDX-License-Identifier: Apache-2.0

//! The classifier: aggregator plus a sigmoid head, its training loop, and
//! end-to-end scoring of a single fact.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregate::{embed_pathset, AggregateCache, Aggregator, AggregatorKind, AggregatorParams, EmbeddedPathSet};
use crate::embed::{EmbeddingMode, FactEmbedder};
use crate::error::{read_bytes, write_file, Error, Result};
use crate::kg::{GraphView, KnowledgeGraph, PredicateId, Triple};
use crate::neural::{
    adam_step, bce_loss, checkpoint, clip_global_norm, dense_backward, dense_forward, sigmoid, Activation,
    AdamState, DenseCache, DenseParams, Tensor,
};
use crate::paths::{extract_paths, Fallback, PathConfig, PathSet};
use crate::patterns::{extract_schema_patterns, PatternSearch, SchemaPattern};
use crate::relatedness::{top_k_predicates, RelatednessMatrix};

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Aggregator and head weights with the settings they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct FactCheckModel {
    pub aggregator: Aggregator,
    /// `[1 × aggregate width]`, applied before a sigmoid.
    pub head: DenseParams,
    pub embedding: EmbeddingMode,
    /// Free-form settings recorded in checkpoints.
    pub settings: BTreeMap<String, String>,
}

struct Forward {
    score: f64,
    agg: AggregateCache,
    head: DenseCache,
}

impl FactCheckModel {
    pub fn init(
        kind: AggregatorKind,
        embedding: EmbeddingMode,
        fact_dim: usize,
        l_max: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let aggregator = Aggregator::init(kind, fact_dim, l_max, hidden, &mut rng)?;
        let head = DenseParams::init(1, aggregator.width(), &mut rng);
        Ok(FactCheckModel {
            aggregator,
            head,
            embedding,
            settings: BTreeMap::new(),
        })
    }

    pub fn kind(&self) -> AggregatorKind {
        self.aggregator.kind
    }

    fn forward_cached(&self, set: &EmbeddedPathSet) -> Result<Forward> {
        let (repr, agg) = self.aggregator.forward(set)?;
        let (z, head) = dense_forward(&repr.combined, &self.head, Activation::Identity)?;
        Ok(Forward {
            score: sigmoid(z[0]),
            agg,
            head,
        })
    }

    /// Truthfulness score in `[0, 1]`.
    pub fn predict(&self, set: &EmbeddedPathSet) -> Result<f64> {
        Ok(self.forward_cached(set)?.score)
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.aggregator.params.tensors();
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.aggregator.params.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }

    fn metadata(&self) -> String {
        let mut meta = BTreeMap::new();
        meta.insert("aggregator".to_owned(), self.kind().to_string());
        meta.insert("embedding".to_owned(), self.embedding.to_string());
        meta.insert("fact_dim".to_owned(), self.aggregator.fact_dim.to_string());
        meta.insert("l_max".to_owned(), self.aggregator.l_max.to_string());
        meta.insert("hidden".to_owned(), self.aggregator.hidden.to_string());
        for (k, v) in &self.settings {
            meta.entry(format!("setting.{k}")).or_insert_with(|| v.clone());
        }
        meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        checkpoint::encode(&self.metadata(), &self.tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, tensors) = checkpoint::decode(bytes)?;
        let mut fields = BTreeMap::new();
        for line in meta.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad metadata line `{line}`")))?;
            fields.insert(k.to_owned(), v.to_owned());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| Error::Checkpoint(format!("metadata lacks `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("metadata `{k}` is not a number")))
        };
        let mut model = FactCheckModel::init(
            get("aggregator")?.parse()?,
            get("embedding")?.parse()?,
            num("fact_dim")?,
            num("l_max")?,
            num("hidden")?,
            0,
        )?;
        model.settings = fields
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("setting.").map(|k| (k.to_owned(), v.clone())))
            .collect();
        let mut slots = model.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.iter_mut().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor shape {:?} does not match expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            **slot = t;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            epochs: 100,
            patience: 10,
            batch_size: 32,
            seed: 0,
            validation_fraction: 0.1,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 || self.batch_size == 0 || self.patience == 0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::InvalidArgument(
                "learning rate, batch size, patience and clip norm must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// An embedded evidence set with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPaths {
    pub paths: EmbeddedPathSet,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation loss per epoch; empty when no validation slice.
    pub validation_loss: Vec<f64>,
    /// 1-based epoch whose weights were kept; 0 when none ran.
    pub best_epoch: usize,
}

/// Seeded per-label split into (train, validation) index lists.
fn stratified_holdout(labels: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f64) * fraction).floor() as usize;
        let n_val = n_val.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Examples per gradient chunk. Fixed so the reduction order, and hence
/// the result, does not depend on the thread count.
const CHUNK: usize = 4;

struct Grads {
    agg: AggregatorParams,
    head: DenseParams,
    loss: f64,
}

impl Grads {
    fn zeros(model: &FactCheckModel) -> Self {
        Grads {
            agg: model.aggregator.params.zeros_like(),
            head: model.head.zeros_like(),
            loss: 0.0,
        }
    }

    fn add(&mut self, other: &Grads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
        self.loss += other.loss;
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.agg.tensors();
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.agg.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}

fn example_grads(model: &FactCheckModel, ex: &LabeledPaths, acc: &mut Grads) -> Result<()> {
    let y = f64::from(u8::from(ex.label));
    let fwd = model.forward_cached(&ex.paths)?;
    acc.loss += bce_loss(&[fwd.score], &[y])?.0;
    let dz = fwd.score - y;
    let d_repr = dense_backward(&[dz], &fwd.head, &model.head, &mut acc.head);
    model.aggregator.backward(&d_repr, &fwd.agg, &mut acc.agg);
    Ok(())
}

fn batch_grads(model: &FactCheckModel, data: &[LabeledPaths], batch: &[usize]) -> Result<Grads> {
    let partials: Vec<Result<Grads>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Grads::zeros(model);
            for &i in chunk {
                example_grads(model, &data[i], &mut g)?;
            }
            Ok(g)
        })
        .collect();
    let mut total = Grads::zeros(model);
    for p in partials {
        total.add(&p?);
    }
    Ok(total)
}

/// Mean loss over `idx`.
fn mean_loss(model: &FactCheckModel, data: &[LabeledPaths], idx: &[usize]) -> Result<f64> {
    let losses: Vec<Result<f64>> = idx
        .par_iter()
        .map(|&i| {
            let p = model.predict(&data[i].paths)?;
            Ok(bce_loss(&[p], &[f64::from(u8::from(data[i].label))])?.0)
        })
        .collect();
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / idx.len().max(1) as f64)
}

/// Minimizes binary cross-entropy with Adam on mini-batches. A stratified
/// validation slice drives early stopping and the best epoch's weights are
/// restored.
pub fn train(mut model: FactCheckModel, data: &[LabeledPaths], cfg: &TrainConfig) -> Result<(FactCheckModel, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let labels: Vec<bool> = data.iter().map(|d| d.label).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::InvalidArgument("training set contains a single class".into()));
    }
    let (mut train_idx, val_idx) = stratified_holdout(&labels, cfg.validation_fraction, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut adam = AdamState::new(cfg.lr);
    let mut report = TrainReport {
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        best_epoch: 0,
    };
    let mut best: Option<(f64, FactCheckModel)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut g = batch_grads(&model, data, batch)?;
            epoch_loss += g.loss;
            let scale = 1.0 / batch.len() as f64;
            let mut gt = g.tensors_mut();
            gt.iter_mut().for_each(|t| t.scale(scale));
            clip_global_norm(&mut gt, cfg.clip_norm);
            let grads = g.tensors();
            adam_step(&mut model.tensors_mut(), &grads, &mut adam)?;
        }
        if !model.tensors().iter().all(|t| t.is_finite()) {
            return Err(Error::Training(format!("non-finite parameters after epoch {epoch}")));
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        report.train_loss.push(train_loss);
        if val_idx.is_empty() {
            report.best_epoch = epoch;
            log::debug!("epoch {epoch}: train loss {train_loss:.5}");
            continue;
        }
        let val_loss = mean_loss(&model, data, &val_idx)?;
        report.validation_loss.push(val_loss);
        log::debug!("epoch {epoch}: train loss {train_loss:.5}, validation loss {val_loss:.5}");
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::info!("early stop after epoch {epoch}; best epoch {}", report.best_epoch);
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, report))
}

/// Which fallback runs when no schema pattern yields a path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FallbackMode {
    None,
    #[default]
    Unconstrained,
    /// Only the target's top-k related predicates.
    TopK,
}

impl std::str::FromStr for FallbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FallbackMode::None),
            "unconstrained" => Ok(FallbackMode::Unconstrained),
            "topk" => Ok(FallbackMode::TopK),
            _ => Err(Error::InvalidArgument(format!(
                "unknown fallback `{s}` (expected none, unconstrained or topk)"
            ))),
        }
    }
}

impl std::fmt::Display for FallbackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FallbackMode::None => "none",
            FallbackMode::Unconstrained => "unconstrained",
            FallbackMode::TopK => "topk",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceConfig {
    pub search: PatternSearch,
    pub paths: PathConfig,
    pub fallback: FallbackMode,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            search: PatternSearch::default(),
            paths: PathConfig::default(),
            fallback: FallbackMode::Unconstrained,
        }
    }
}

/// Shared inputs of evidence extraction, with per-predicate pattern memo.
pub struct Evidence<'a> {
    pub kg: &'a KnowledgeGraph,
    pub matrix: &'a RelatednessMatrix,
    pub embedder: &'a FactEmbedder,
    pub cfg: EvidenceConfig,
    patterns: Mutex<HashMap<PredicateId, Arc<Vec<SchemaPattern>>>>,
}

impl<'a> Evidence<'a> {
    pub fn new(
        kg: &'a KnowledgeGraph,
        matrix: &'a RelatednessMatrix,
        embedder: &'a FactEmbedder,
        cfg: EvidenceConfig,
    ) -> Self {
        Evidence {
            kg,
            matrix,
            embedder,
            cfg,
            patterns: Mutex::new(HashMap::new()),
        }
    }

    /// Supplies precomputed patterns for `p`, e.g. from a cache file.
    pub fn set_patterns(&self, p: PredicateId, patterns: Vec<SchemaPattern>) {
        self.patterns.lock().unwrap().insert(p, Arc::new(patterns));
    }

    pub fn patterns(&self, p: PredicateId) -> Result<Arc<Vec<SchemaPattern>>> {
        if !self.matrix.contains(p) {
            return Err(Error::MissingRelatedness(self.kg.vocab.predicate_name(p).to_owned()));
        }
        if let Some(found) = self.patterns.lock().unwrap().get(&p) {
            return Ok(found.clone());
        }
        let computed = Arc::new(extract_schema_patterns(p, self.cfg.search, &self.kg.schema, self.matrix)?);
        Ok(self.patterns.lock().unwrap().entry(p).or_insert(computed).clone())
    }

    pub fn paths<G: GraphView>(&self, g: &G, fact: Triple) -> Result<PathSet> {
        let patterns = self.patterns(fact.p)?;
        collect_paths(self.kg, self.matrix, &self.cfg, &patterns, g, fact)
    }

    pub fn embedded<G: GraphView>(&self, g: &G, fact: Triple) -> Result<(PathSet, EmbeddedPathSet)> {
        let paths = self.paths(g, fact)?;
        let embedded = embed_pathset(&paths, self.embedder, &self.kg.vocab)?;
        Ok((paths, embedded))
    }
}

/// Paths for `fact` from `patterns`, with the configured fallback.
pub fn collect_paths<G: GraphView>(
    kg: &KnowledgeGraph,
    matrix: &RelatednessMatrix,
    cfg: &EvidenceConfig,
    patterns: &[SchemaPattern],
    g: &G,
    fact: Triple,
) -> Result<PathSet> {
    let mut paths = cfg.paths.clone();
    paths.fallback = match cfg.fallback {
        FallbackMode::None => Fallback::Disabled,
        FallbackMode::Unconstrained => Fallback::Unconstrained,
        FallbackMode::TopK => Fallback::Restricted(top_k_predicates(matrix, fact.p, cfg.search.k)?.into_iter().collect()),
    };
    Ok(extract_paths(g, kg.schema.hierarchy(), fact, patterns, &paths))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub score: f64,
    pub label: bool,
    pub evidence: PathSet,
}

impl Verdict {
    /// `Φ=<score> label=<bool>` followed by the evidence dump.
    pub fn render(&self, vocab: &crate::kg::Vocabulary) -> String {
        format!("Φ={:.6} label={}\n{}", self.score, self.label, self.evidence.dump(vocab))
    }
}

pub fn score_fact<G: GraphView>(model: &FactCheckModel, evidence: &Evidence<'_>, g: &G, fact: Triple) -> Result<Verdict> {
    if evidence.embedder.mode() != model.embedding {
        return Err(Error::Config(format!(
            "model was trained with {} embeddings but {} embeddings were supplied",
            model.embedding,
            evidence.embedder.mode()
        )));
    }
    let (paths, embedded) = evidence.embedded(g, fact)?;
    let score = model.predict(&embedded)?;
    Ok(Verdict {
        score,
        label: score > DECISION_THRESHOLD,
        evidence: paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::EmbeddedPath;
    use rand::Rng;

    /// Positives carry one length-2 path built from a fixed "signal" fact
    /// vector; negatives carry unrelated length-1 noise or nothing.
    fn planted(n: usize, fact_dim: usize, seed: u64) -> Vec<LabeledPaths> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signal: Vec<f64> = (0..fact_dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        (0..n)
            .map(|i| {
                let label = i % 3 == 0;
                let mut set = EmbeddedPathSet::new(fact_dim, 2);
                if label {
                    let noise: Vec<f64> = (0..fact_dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
                    set.push(EmbeddedPath {
                        facts: vec![signal.clone(), noise],
                        score: Some(0.9),
                        key: format!("pos{i}"),
                    })
                    .unwrap();
                } else if rng.gen_bool(0.5) {
                    let noise: Vec<f64> = (0..fact_dim).map(|_| rng.gen_range(-0.3..0.3)).collect();
                    set.push(EmbeddedPath {
                        facts: vec![noise],
                        score: Some(0.5),
                        key: format!("neg{i}"),
                    })
                    .unwrap();
                }
                LabeledPaths { paths: set, label }
            })
            .collect()
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            lr: 0.01,
            epochs: 40,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_task_is_learned_by_every_aggregator() {
        let data = planted(60, 4, 1);
        for kind in AggregatorKind::ALL {
            let model = FactCheckModel::init(kind, EmbeddingMode::SkipGram, 4, 2, 8, 3).unwrap();
            let cfg = TrainConfig {
                validation_fraction: 0.0,
                ..quick_cfg()
            };
            let (model, report) = train(model, &data, &cfg).unwrap();
            for w in report.train_loss[..5].windows(2) {
                assert!(w[1] < w[0], "{kind}: {:?}", &report.train_loss[..5]);
            }
            let correct = data
                .iter()
                .filter(|d| (model.predict(&d.paths).unwrap() > 0.5) == d.label)
                .count();
            assert_eq!(correct, data.len(), "{kind}");
            let pos = data.iter().find(|d| d.label).unwrap();
            assert!(model.predict(&pos.paths).unwrap() > 0.9, "{kind}");
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let data = planted(12, 3, 2);
        let model = FactCheckModel::init(AggregatorKind::MaxPool, EmbeddingMode::SkipGram, 3, 2, 4, 9).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (trained, report) = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(trained, model);
        assert!(report.train_loss.is_empty());
    }

    #[test]
    fn training_is_reproducible_to_the_byte() {
        let data = planted(40, 3, 3);
        let run = || {
            let model = FactCheckModel::init(AggregatorKind::LstmMaxPool, EmbeddingMode::SkipGram, 3, 2, 4, 5).unwrap();
            let cfg = TrainConfig {
                epochs: 5,
                ..quick_cfg()
            };
            train(model, &data, &cfg).unwrap().0.to_bytes()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bad_training_sets_are_rejected() {
        let model = FactCheckModel::init(AggregatorKind::AvgPool, EmbeddingMode::SkipGram, 3, 2, 4, 0).unwrap();
        assert!(train(model.clone(), &[], &TrainConfig::default()).is_err());
        let ones: Vec<LabeledPaths> = planted(9, 3, 1).into_iter().filter(|d| d.label).collect();
        assert!(train(model, &ones, &TrainConfig::default()).is_err());
    }

    #[test]
    fn early_stopping_keeps_the_best_validation_epoch() {
        let data = planted(80, 3, 4);
        let model = FactCheckModel::init(AggregatorKind::MaxPool, EmbeddingMode::SkipGram, 3, 2, 4, 1).unwrap();
        let cfg = TrainConfig {
            validation_fraction: 0.2,
            patience: 3,
            lr: 0.05,
            ..quick_cfg()
        };
        let (trained, report) = train(model, &data, &cfg).unwrap();
        let best = report.validation_loss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.validation_loss[report.best_epoch - 1], best);
        let (_, val) = stratified_holdout(&data.iter().map(|d| d.label).collect::<Vec<_>>(), 0.2, cfg.seed);
        let recomputed = mean_loss(&trained, &data, &val).unwrap();
        assert!((recomputed - best).abs() < 1e-12);
    }

    #[test]
    fn empty_evidence_scores_head_bias() {
        let mut model = FactCheckModel::init(AggregatorKind::AvgPool, EmbeddingMode::SkipGram, 3, 2, 4, 0).unwrap();
        model.head.b.data_mut()[0] = 0.7;
        let p = model.predict(&EmbeddedPathSet::new(3, 2)).unwrap();
        assert_eq!(p, sigmoid(0.7));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let data = planted(20, 3, 6);
        for kind in AggregatorKind::ALL {
            let mut model = FactCheckModel::init(kind, EmbeddingMode::Compositional, 3, 2, 4, 8).unwrap();
            model.settings.insert("k".into(), "10".into());
            let back = FactCheckModel::from_bytes(&model.to_bytes()).unwrap();
            assert_eq!(back, model);
            for d in &data {
                assert_eq!(
                    back.predict(&d.paths).unwrap().to_bits(),
                    model.predict(&d.paths).unwrap().to_bits()
                );
            }
        }
        let mut bytes = FactCheckModel::init(AggregatorKind::AvgPool, EmbeddingMode::SkipGram, 3, 2, 4, 0)
            .unwrap()
            .to_bytes();
        let n = bytes.len();
        bytes[n - 40] ^= 0xff;
        assert!(FactCheckModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let (train, val) = stratified_holdout(&labels, 0.1, 0);
        assert_eq!(train.len() + val.len(), 30);
        assert_eq!(val.iter().filter(|&&i| labels[i]).count(), 1);
        assert_eq!(val.iter().filter(|&&i| !labels[i]).count(), 2);
    }
}
