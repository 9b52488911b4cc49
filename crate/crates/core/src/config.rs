// SPDX-License-Identifier: Apache-2.0

//! Run settings from `key = value` files and overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::aggregate::AggregatorKind;
use crate::benchmark::BenchmarkConfig;
use crate::checker::{EvidenceConfig, TrainConfig};
use crate::embed::{EmbedConfig, EmbeddingMode};
use crate::error::{read_file, Error, Result};
use crate::eval::{ExperimentGrid, ExperimentOptions};
use crate::kg::TripleFormat;

/// Parsed `key = value` lines; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            let key = k.trim().replace('-', "_");
            if values.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(Error::parse(origin, i + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }
}

/// Every recognised key, in documentation order.
pub const KEYS: &[(&str, &str)] = &[
    ("triples", "triple file"),
    ("schema", "schema file (subClassOf/domain/range lines)"),
    ("format", "triple format: tsv or nt"),
    ("embeddings", "embedding table file"),
    ("matrix", "relatedness matrix file"),
    ("benchmark", "benchmark file"),
    ("model", "model checkpoint"),
    ("pattern_cache", "directory of cached pattern lists"),
    ("seed", "global seed"),
    ("threads", "worker threads, 0 for all cores"),
    ("k", "related predicates considered per target"),
    ("d", "maximum pattern length"),
    ("pattern_cap", "patterns kept per predicate"),
    ("l_max", "maximum path length"),
    ("paths_per_length", "paths kept per length"),
    ("enumeration_limit", "paths enumerated per pattern before stopping"),
    ("fallback", "none, unconstrained or topk"),
    ("embedding", "skipgram or compositional"),
    ("dim", "embedding dimension"),
    ("walks_per_node", "random walks started per line-graph node"),
    ("walk_length", "random walk length"),
    ("window", "skip-gram window"),
    ("negatives", "skip-gram negative samples"),
    ("embed_epochs", "skip-gram epochs"),
    ("embed_lr", "skip-gram initial learning rate"),
    ("aggregator", "avgpool, maxpool or lstmmaxpool"),
    ("hidden", "aggregator hidden width"),
    ("lr", "classifier learning rate"),
    ("epochs", "classifier epochs"),
    ("patience", "early-stopping patience"),
    ("batch_size", "classifier batch size"),
    ("validation_fraction", "share of training facts held out for early stopping"),
    ("clip_norm", "gradient norm clip"),
    ("predicates", "comma-separated benchmark predicates"),
    ("total_positives", "benchmark positives over all predicates"),
    ("max_per_predicate", "benchmark positives per predicate cap"),
    ("min_facts", "smallest predicate admitted to the benchmark"),
    ("neg_ratio", "negatives per positive"),
    ("train_fraction", "benchmark train share"),
    ("runs", "evaluation seeds, starting at `seed`"),
    ("train_fractions", "comma-separated evaluation train shares"),
    ("aggregators", "comma-separated evaluation aggregators"),
    ("embedding_modes", "comma-separated evaluation embeddings"),
    ("per_predicate", "also report per-predicate AUC"),
];

/// Keys that shape evidence and are stored with trained models.
pub const EVIDENCE_KEYS: &[&str] = &[
    "k",
    "d",
    "pattern_cap",
    "l_max",
    "paths_per_length",
    "enumeration_limit",
    "fallback",
    "seed",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub triples: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub format: TripleFormat,
    pub embeddings: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub pattern_cache: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub evidence: EvidenceConfig,
    pub embedding: EmbeddingMode,
    /// Mode default when unset.
    pub dim: Option<usize>,
    pub embed: EmbedConfig,
    pub aggregator: AggregatorKind,
    pub hidden: usize,
    pub train: TrainConfig,
    pub bench: BenchmarkConfig,
    pub predicates: Option<Vec<String>>,
    pub runs: usize,
    pub train_fractions: Vec<f64>,
    pub aggregators: Vec<AggregatorKind>,
    pub embedding_modes: Vec<EmbeddingMode>,
    pub per_predicate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            triples: None,
            schema: None,
            format: TripleFormat::Tsv,
            embeddings: None,
            matrix: None,
            benchmark: None,
            model: None,
            pattern_cache: None,
            seed: 0,
            threads: 0,
            evidence: EvidenceConfig::default(),
            embedding: EmbeddingMode::SkipGram,
            dim: None,
            embed: EmbedConfig::default(),
            aggregator: AggregatorKind::LstmMaxPool,
            hidden: 64,
            train: TrainConfig::default(),
            bench: BenchmarkConfig::default(),
            predicates: None,
            runs: 4,
            train_fractions: vec![0.5],
            aggregators: AggregatorKind::ALL.to_vec(),
            embedding_modes: vec![EmbeddingMode::SkipGram],
            per_predicate: false,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<Vec<_>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` is empty")));
    }
    Ok(items)
}

fn parsed<T: FromStr<Err = Error>>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|e| Error::Config(format!("`{key}`: {e}")))
}

impl RunConfig {
    /// Sets one key from its string form.
    pub fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        match k {
            "triples" => self.triples = Some(v.into()),
            "schema" => self.schema = Some(v.into()),
            "format" => self.format = parsed(k, v)?,
            "embeddings" => self.embeddings = Some(v.into()),
            "matrix" => self.matrix = Some(v.into()),
            "benchmark" => self.benchmark = Some(v.into()),
            "model" => self.model = Some(v.into()),
            "pattern_cache" => self.pattern_cache = Some(v.into()),
            "seed" => self.seed = value(k, v)?,
            "threads" => self.threads = value(k, v)?,
            "k" => self.evidence.search.k = value(k, v)?,
            "d" => self.evidence.search.max_len = value(k, v)?,
            "pattern_cap" => self.evidence.search.cap = value(k, v)?,
            "l_max" => self.evidence.paths.l_max = value(k, v)?,
            "paths_per_length" => self.evidence.paths.max_paths_per_length = value(k, v)?,
            "enumeration_limit" => self.evidence.paths.enumeration_limit = value(k, v)?,
            "fallback" => self.evidence.fallback = parsed(k, v)?,
            "embedding" => self.embedding = parsed(k, v)?,
            "dim" => self.dim = Some(value(k, v)?),
            "walks_per_node" => self.embed.walks_per_node = value(k, v)?,
            "walk_length" => self.embed.walk_length = value(k, v)?,
            "window" => self.embed.skipgram.window = value(k, v)?,
            "negatives" => self.embed.skipgram.negatives = value(k, v)?,
            "embed_epochs" => self.embed.skipgram.epochs = value(k, v)?,
            "embed_lr" => self.embed.skipgram.lr = value(k, v)?,
            "aggregator" => self.aggregator = parsed(k, v)?,
            "hidden" => self.hidden = value(k, v)?,
            "lr" => self.train.lr = value(k, v)?,
            "epochs" => self.train.epochs = value(k, v)?,
            "patience" => self.train.patience = value(k, v)?,
            "batch_size" => self.train.batch_size = value(k, v)?,
            "validation_fraction" => self.train.validation_fraction = value(k, v)?,
            "clip_norm" => self.train.clip_norm = value(k, v)?,
            "predicates" => self.predicates = Some(list(k, v, |s| Ok(s.to_owned()))?),
            "total_positives" => self.bench.total_positives = value(k, v)?,
            "max_per_predicate" => self.bench.max_per_predicate = value(k, v)?,
            "min_facts" => self.bench.min_facts = value(k, v)?,
            "neg_ratio" => self.bench.neg_ratio = value(k, v)?,
            "train_fraction" => self.bench.train_fraction = value(k, v)?,
            "runs" => self.runs = value(k, v)?,
            "train_fractions" => self.train_fractions = list(k, v, |s| value(k, s))?,
            "aggregators" => self.aggregators = list(k, v, |s| parsed(k, s))?,
            "embedding_modes" => self.embedding_modes = list(k, v, |s| parsed(k, s))?,
            "per_predicate" => self.per_predicate = value(k, v)?,
            _ => return Err(Error::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    /// Applies layers in order, later layers winning.
    pub fn from_layers<'a>(layers: impl IntoIterator<Item = &'a BTreeMap<String, String>>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for layer in layers {
            for (k, v) in layer {
                cfg.apply(k, v)?;
            }
        }
        Ok(cfg)
    }

    /// Embedding settings for `mode`, seeded and threaded from this config.
    pub fn embed_config(&self, mode: EmbeddingMode) -> EmbedConfig {
        let mut e = self.embed.clone();
        e.mode = mode;
        e.dim = self.dim.unwrap_or_else(|| EmbedConfig::new(mode).dim);
        e.skipgram.seed = self.seed;
        e.skipgram.threads = self.skipgram_threads();
        e
    }

    fn skipgram_threads(&self) -> usize {
        if self.threads == 0 {
            rayon::current_num_threads()
        } else {
            self.threads
        }
    }

    pub fn evidence_config(&self) -> EvidenceConfig {
        let mut e = self.evidence.clone();
        e.paths.seed = self.seed;
        e
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn grid(&self) -> ExperimentGrid {
        ExperimentGrid {
            embeddings: self.embedding_modes.clone(),
            aggregators: self.aggregators.clone(),
            train_fractions: self.train_fractions.clone(),
            seeds: (self.seed..self.seed + self.runs as u64).collect(),
        }
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            embed: [EmbeddingMode::SkipGram, EmbeddingMode::Compositional]
                .into_iter()
                .map(|m| (m, self.embed_config(m)))
                .collect(),
            evidence: self.evidence_config(),
            train: self.train.clone(),
            hidden: self.hidden,
            per_predicate: self.per_predicate,
            matrix: None,
        }
    }

    /// Evidence settings in `key = value` form, for storing with a model.
    pub fn evidence_settings(&self) -> BTreeMap<String, String> {
        let s = &self.evidence;
        [
            ("k", s.search.k.to_string()),
            ("d", s.search.max_len.to_string()),
            ("pattern_cap", s.search.cap.to_string()),
            ("l_max", s.paths.l_max.to_string()),
            ("paths_per_length", s.paths.max_paths_per_length.to_string()),
            ("enumeration_limit", s.paths.enumeration_limit.to_string()),
            ("fallback", s.fallback.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }

    /// Requires an optional file setting.
    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required (flag --{} or config key `{key}`)", key.replace('_', "-"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::FallbackMode;
    use crate::patterns::PatternSearch;

    #[test]
    fn parse_and_apply() {
        let f = ConfigFile::parse("# run\nk = 7\nl-max=3 # short\n\nfallback = topk\naggregators = avg, lstm\n", "c").unwrap();
        let cfg = RunConfig::from_layers([&f.values]).unwrap();
        assert_eq!(cfg.evidence.search.k, 7);
        assert_eq!(cfg.evidence.paths.l_max, 3);
        assert_eq!(cfg.evidence.fallback, FallbackMode::TopK);
        assert_eq!(cfg.aggregators, vec![AggregatorKind::AvgPool, AggregatorKind::LstmMaxPool]);
    }

    #[test]
    fn later_layers_win() {
        let file = ConfigFile::parse("k = 7\nseed = 3\n", "c").unwrap();
        let flags = BTreeMap::from([("k".to_owned(), "5".to_owned())]);
        let cfg = RunConfig::from_layers([&file.values, &flags]).unwrap();
        assert_eq!((cfg.evidence.search.k, cfg.seed), (5, 3));
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.evidence.search, PatternSearch { k: 10, max_len: 4, cap: 50 });
        assert_eq!(cfg.evidence.paths.l_max, 4);
        assert_eq!(cfg.evidence.paths.max_paths_per_length, 150);
        assert_eq!((cfg.train.lr, cfg.train.epochs), (0.001, 100));
        assert_eq!(cfg.embed_config(EmbeddingMode::Compositional).dim, 64);
        assert_eq!(cfg.embed_config(EmbeddingMode::SkipGram).dim, 128);
        assert_eq!(cfg.grid().seeds, vec![0, 1, 2, 3]);
    }

    #[test]
    fn errors() {
        assert!(ConfigFile::parse("k 7\n", "c").is_err());
        assert!(ConfigFile::parse("k = 1\nk = 2\n", "c").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.apply("nope", "1").is_err());
        assert!(cfg.apply("k", "x").is_err());
        assert!(cfg.apply("aggregators", " , ").is_err());
        assert!(cfg.require(&None, "matrix").is_err());
    }

    #[test]
    fn every_key_is_applicable_and_evidence_round_trips() {
        let mut cfg = RunConfig::default();
        for (k, _) in KEYS {
            let v = match *k {
                "format" => "tsv",
                "fallback" => "none",
                "embedding" => "compositional",
                "aggregator" => "maxpool",
                "predicates" => "a,b",
                "train_fractions" => "0.5,0.9",
                "aggregators" => "avgpool",
                "embedding_modes" => "skipgram",
                "per_predicate" => "true",
                "lr" | "embed_lr" | "validation_fraction" | "clip_norm" | "train_fraction" => "0.25",
                "triples" | "schema" | "embeddings" | "matrix" | "benchmark" | "model" | "pattern_cache" => "x",
                _ => "3",
            };
            cfg.apply(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        let stored = cfg.evidence_settings();
        assert_eq!(stored.keys().count(), EVIDENCE_KEYS.len());
        let back = RunConfig::from_layers([&stored]).unwrap();
        assert_eq!(back.evidence, cfg.evidence);
    }
}
