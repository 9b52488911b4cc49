// SPDX-License-Identifier: Apache-2.0

//! ROC AUC and grid experiments over a benchmark.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::aggregate::{AggregatorKind, EmbeddedPathSet};
use crate::benchmark::BenchmarkSet;
use crate::checker::{train, Evidence, EvidenceConfig, FactCheckModel, LabeledPaths, TrainConfig};
use crate::embed::{train_fact_embedder, EmbedConfig, EmbeddingMode};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, PredicateId, Triple};
use crate::relatedness::{build_relatedness_matrix, RelatednessMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredExample {
    pub score: f64,
    pub label: bool,
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(examples: &[ScoredExample]) -> Result<f64> {
    if let Some(bad) = examples.iter().find(|e| !e.score.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {}", bad.score)));
    }
    let n_pos = examples.iter().filter(|e| e.label).count();
    let n_neg = examples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both positive and negative examples".into()));
    }
    let mut sorted: Vec<&ScoredExample> = examples.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    // Midranks; sum over positives gives the Mann-Whitney U.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].score == sorted[i].score {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * sorted[i..=j].iter().filter(|e| e.label).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub embeddings: Vec<EmbeddingMode>,
    pub aggregators: Vec<AggregatorKind>,
    pub train_fractions: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            embeddings: vec![EmbeddingMode::SkipGram],
            aggregators: AggregatorKind::ALL.to_vec(),
            train_fractions: vec![0.5],
            seeds: (0..4).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    /// Embedding settings; `mode` and the skip-gram seed are set per run.
    pub embed: BTreeMap<EmbeddingMode, EmbedConfig>,
    pub evidence: EvidenceConfig,
    pub train: TrainConfig,
    pub hidden: usize,
    /// Also report one row per predicate.
    pub per_predicate: bool,
    /// Use this matrix instead of one derived from the trained embeddings.
    pub matrix: Option<RelatednessMatrix>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            embed: [EmbeddingMode::SkipGram, EmbeddingMode::Compositional]
                .into_iter()
                .map(|m| (m, EmbedConfig::new(m)))
                .collect(),
            evidence: EvidenceConfig::default(),
            train: TrainConfig::default(),
            hidden: 64,
            per_predicate: false,
            matrix: None,
        }
    }
}

/// Seed column of a row: one run, or the mean over runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunSeed {
    Seed(u64),
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    /// Predicate name, or `*` for all predicates pooled.
    pub predicate: String,
    pub embedding: EmbeddingMode,
    pub aggregator: AggregatorKind,
    pub train_frac: f64,
    pub seed: RunSeed,
    /// `None` when the cell failed.
    pub auc: Option<f64>,
    pub seconds: Option<f64>,
}

pub const RESULT_HEADER: &str = "predicate\tembedding\taggregator\ttrain_frac\tseed\tauc\tseconds";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// `with_timing = false` writes `-` in the seconds column so that
    /// repeated runs are byte-identical.
    pub fn to_tsv(&self, with_timing: bool) -> String {
        let mut out = format!("{RESULT_HEADER}\n");
        for r in &self.rows {
            let seed = match r.seed {
                RunSeed::Seed(s) => s.to_string(),
                RunSeed::Mean => "mean".to_owned(),
            };
            let auc = r.auc.map_or_else(|| "failed".to_owned(), |a| format!("{a:.6}"));
            let secs = match r.seconds {
                Some(s) if with_timing => format!("{s:.3}"),
                _ => "-".to_owned(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{seed}\t{auc}\t{secs}",
                r.predicate, r.embedding, r.aggregator, r.train_frac
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(RESULT_HEADER) {
            return Err(Error::Parse {
                origin: "results".into(),
                line: 1,
                message: "missing results header".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = |msg: &str| Error::Parse {
                origin: "results".into(),
                line: i + 2,
                message: msg.to_owned(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(bad("expected 7 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            rows.push(ResultRow {
                predicate: f[0].to_owned(),
                embedding: f[1].parse()?,
                aggregator: f[2].parse()?,
                train_frac: num(f[3])?,
                seed: match f[4] {
                    "mean" => RunSeed::Mean,
                    s => RunSeed::Seed(s.parse().map_err(|_| bad("bad seed"))?),
                },
                auc: match f[5] {
                    "failed" => None,
                    s => Some(num(s)?),
                },
                seconds: match f[6] {
                    "-" => None,
                    s => Some(num(s)?),
                },
            });
        }
        Ok(ResultTable { rows })
    }

    /// Mean pooled AUC for a grid cell.
    pub fn mean_auc(&self, embedding: EmbeddingMode, aggregator: AggregatorKind, train_frac: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.predicate == "*"
                    && r.seed == RunSeed::Mean
                    && r.embedding == embedding
                    && r.aggregator == aggregator
                    && r.train_frac == train_frac
            })
            .and_then(|r| r.auc)
    }
}

/// Evidence for every benchmark fact under one embedding run.
struct Prepared {
    sets: HashMap<Triple, EmbeddedPathSet>,
    fact_dim: usize,
}

fn prepare(
    kg: &KnowledgeGraph,
    bench: &BenchmarkSet,
    mode: EmbeddingMode,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<Prepared> {
    let held_out = kg.abox.without(&bench.positives());
    let mut ecfg = opts.embed.get(&mode).cloned().unwrap_or_else(|| EmbedConfig::new(mode));
    ecfg.mode = mode;
    ecfg.skipgram.seed = seed;
    let (embedder, _) = train_fact_embedder(&held_out, &ecfg)?;
    let derived;
    let matrix = match &opts.matrix {
        Some(m) => m,
        None => {
            let table = embedder.predicate_table(&kg.vocab)?;
            derived = build_relatedness_matrix(&table, &kg.abox.predicates(), &kg.vocab);
            &derived
        }
    };
    let mut ev_cfg = opts.evidence.clone();
    ev_cfg.paths.seed = seed;
    let evidence = Evidence::new(kg, matrix, &embedder, ev_cfg);
    let facts: Vec<Triple> = bench.per_predicate.values().flat_map(|s| s.all().map(|f| f.triple)).collect();
    let sets = facts
        .par_iter()
        .map(|&t| Ok((t, evidence.embedded(&held_out, t)?.1)))
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(Prepared {
        sets,
        fact_dim: embedder.fact_dim(),
    })
}

struct CellOutcome {
    /// (predicate, score, label) per test fact.
    scored: Vec<(PredicateId, ScoredExample)>,
}

fn run_cell(
    prepared: &Prepared,
    bench: &BenchmarkSet,
    mode: EmbeddingMode,
    kind: AggregatorKind,
    frac: f64,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<CellOutcome> {
    let split = bench.resplit(frac, seed)?;
    let lookup = |t: &Triple| {
        prepared
            .sets
            .get(t)
            .ok_or_else(|| Error::Training("benchmark fact without prepared evidence".into()))
    };
    let data = split
        .per_predicate
        .values()
        .flat_map(|s| s.train())
        .map(|f| {
            Ok(LabeledPaths {
                paths: lookup(&f.triple)?.clone(),
                label: f.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let l_max = opts.evidence.paths.l_max;
    let model = FactCheckModel::init(kind, mode, prepared.fact_dim, l_max, opts.hidden, seed)?;
    let tcfg = TrainConfig {
        seed,
        ..opts.train.clone()
    };
    let (model, _) = train(model, &data, &tcfg)?;
    let scored = split
        .per_predicate
        .iter()
        .flat_map(|(&p, s)| s.test().map(move |f| (p, f)))
        .map(|(p, f)| {
            let score = model.predict(lookup(&f.triple)?)?;
            Ok((p, ScoredExample { score, label: f.label }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellOutcome { scored })
}

/// Runs every grid cell for every seed. Embeddings and evidence are built
/// once per (embedding, seed) on the KG with all benchmark positives
/// removed. A failing cell becomes a `failed` row.
pub fn run_experiment(
    kg: &KnowledgeGraph,
    bench: &BenchmarkSet,
    grid: &ExperimentGrid,
    opts: &ExperimentOptions,
) -> Result<ResultTable> {
    if grid.embeddings.is_empty() || grid.aggregators.is_empty() || grid.train_fractions.is_empty() || grid.seeds.is_empty() {
        return Err(Error::InvalidArgument("experiment grid has an empty axis".into()));
    }
    if let Some(f) = grid.train_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::InvalidArgument(format!("train fraction {f} is not in (0, 1)")));
    }
    if bench.is_empty() {
        return Err(Error::InvalidArgument("benchmark is empty".into()));
    }

    let runs: Vec<(EmbeddingMode, u64)> = grid
        .embeddings
        .iter()
        .flat_map(|&m| grid.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let prepared: Vec<(Result<Prepared>, f64)> = runs
        .par_iter()
        .map(|&(m, s)| {
            let start = Instant::now();
            let p = prepare(kg, bench, m, s, opts);
            (p, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut cells = Vec::new();
    for (ri, &(m, s)) in runs.iter().enumerate() {
        for &a in &grid.aggregators {
            for &f in &grid.train_fractions {
                cells.push((ri, m, a, f, s));
            }
        }
    }
    let outcomes: Vec<(Result<CellOutcome>, f64)> = cells
        .par_iter()
        .map(|&(ri, m, a, f, s)| {
            let start = Instant::now();
            let out = match &prepared[ri].0 {
                Ok(p) => run_cell(p, bench, m, a, f, s, opts),
                Err(e) => Err(Error::Training(format!("evidence preparation failed: {e}"))),
            };
            (out, start.elapsed().as_secs_f64() + prepared[ri].1)
        })
        .collect();

    let mut rows = Vec::new();
    let preds: Vec<PredicateId> = bench.per_predicate.keys().copied().collect();
    for (&(_, m, a, f, s), (out, secs)) in cells.iter().zip(&outcomes) {
        let base = ResultRow {
            predicate: "*".to_owned(),
            embedding: m,
            aggregator: a,
            train_frac: f,
            seed: RunSeed::Seed(s),
            auc: None,
            seconds: Some(*secs),
        };
        match out {
            Err(e) => {
                log::warn!("cell {m}/{a}/{f}/seed {s} failed: {e}");
                rows.push(base.clone());
                if opts.per_predicate {
                    for &p in &preds {
                        rows.push(ResultRow {
                            predicate: kg.vocab.predicate_name(p).to_owned(),
                            ..base.clone()
                        });
                    }
                }
            }
            Ok(o) => {
                let all: Vec<ScoredExample> = o.scored.iter().map(|(_, e)| *e).collect();
                rows.push(ResultRow {
                    auc: auc(&all).ok(),
                    ..base.clone()
                });
                if opts.per_predicate {
                    for &p in &preds {
                        let mine: Vec<ScoredExample> =
                            o.scored.iter().filter(|(q, _)| *q == p).map(|(_, e)| *e).collect();
                        rows.push(ResultRow {
                            predicate: kg.vocab.predicate_name(p).to_owned(),
                            auc: auc(&mine).ok(),
                            ..base.clone()
                        });
                    }
                }
            }
        }
    }

    // Means over seeds, per (predicate, embedding, aggregator, fraction).
    let mut groups: BTreeMap<(String, String, String, u64), Vec<&ResultRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &rows {
        let key = (
            r.predicate.clone(),
            r.embedding.to_string(),
            r.aggregator.to_string(),
            r.train_frac.to_bits(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut means = Vec::new();
    for key in order {
        let members = &groups[&key];
        let aucs: Vec<f64> = members.iter().filter_map(|r| r.auc).collect();
        let secs: Vec<f64> = members.iter().filter_map(|r| r.seconds).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        means.push(ResultRow {
            seed: RunSeed::Mean,
            auc: mean(&aucs),
            seconds: mean(&secs),
            ..members[0].clone()
        });
    }
    rows.extend(means);
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};
    use proptest::collection::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(score: f64, label: bool) -> ScoredExample {
        ScoredExample { score, label }
    }

    /// Every (positive, negative) pair.
    fn pair_oracle(examples: &[ScoredExample]) -> f64 {
        let (mut credit, mut pairs) = (0.0, 0.0);
        for p in examples.iter().filter(|e| e.label) {
            for n in examples.iter().filter(|e| !e.label) {
                pairs += 1.0;
                if p.score > n.score {
                    credit += 1.0;
                } else if p.score == n.score {
                    credit += 0.5;
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn perfect_separation() {
        let e = [ex(0.9, true), ex(0.8, true), ex(0.1, false), ex(0.3, false)];
        assert_eq!(auc(&e).unwrap(), 1.0);
        let flipped: Vec<_> = e.iter().map(|x| ex(x.score, !x.label)).collect();
        assert_eq!(auc(&flipped).unwrap(), 0.0);
    }

    #[test]
    fn single_class_and_nan_are_errors() {
        assert!(auc(&[ex(0.1, true), ex(0.2, true)]).is_err());
        assert!(auc(&[]).is_err());
        assert!(auc(&[ex(f64::NAN, true), ex(0.2, false)]).is_err());
    }

    #[test]
    fn random_labels_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e: Vec<_> = (0..1000).map(|_| ex(rng.gen(), rng.gen_bool(0.5))).collect();
        assert!((auc(&e).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn twelve_examples_with_a_tie() {
        let e = [
            ex(0.95, true),
            ex(0.90, false),
            ex(0.85, true),
            ex(0.70, true),
            ex(0.70, false),
            ex(0.60, true),
            ex(0.55, false),
            ex(0.40, true),
            ex(0.35, false),
            ex(0.20, false),
            ex(0.15, true),
            ex(0.05, false),
        ];
        // 6 x 6 pairs: 23 wins and one tie.
        assert_eq!(pair_oracle(&e), 23.5 / 36.0);
        assert!((auc(&e).unwrap() - 23.5 / 36.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_pair_oracle(v in vec((0u8..6, any::<bool>()), 2..40)) {
            let e: Vec<_> = v.iter().map(|&(s, l)| ex(f64::from(s), l)).collect();
            if let Ok(a) = auc(&e) {
                prop_assert!((a - pair_oracle(&e)).abs() < 1e-12);
            }
        }

        #[test]
        fn monotone_transform_invariance(v in vec((-50.0f64..50.0, any::<bool>()), 2..60)) {
            let e: Vec<_> = v.iter().map(|&(s, l)| ex(s, l)).collect();
            if let Ok(a) = auc(&e) {
                let t: Vec<_> = e.iter().map(|x| ex((x.score / 10.0).exp() * 3.0 - 7.0, x.label)).collect();
                let b = auc(&t).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                let s: Vec<_> = e.iter().map(|x| ex(x.score.powi(3) + x.score, x.label)).collect();
                prop_assert!((a - auc(&s).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn flipping_labels_complements(scores in proptest::sample::subsequence((0..200).collect::<Vec<i32>>(), 2..40), labels in vec(any::<bool>(), 40)) {
            let e: Vec<_> = scores.iter().zip(&labels).map(|(&s, &l)| ex(f64::from(s), l)).collect();
            if let Ok(a) = auc(&e) {
                let f: Vec<_> = e.iter().map(|x| ex(x.score, !x.label)).collect();
                prop_assert!((auc(&f).unwrap() - (1.0 - a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_round_trip() {
        let t = ResultTable {
            rows: vec![
                ResultRow {
                    predicate: "*".into(),
                    embedding: EmbeddingMode::SkipGram,
                    aggregator: AggregatorKind::MaxPool,
                    train_frac: 0.5,
                    seed: RunSeed::Seed(3),
                    auc: Some(0.75),
                    seconds: Some(1.5),
                },
                ResultRow {
                    predicate: "director".into(),
                    embedding: EmbeddingMode::Compositional,
                    aggregator: AggregatorKind::LstmMaxPool,
                    train_frac: 0.9,
                    seed: RunSeed::Mean,
                    auc: None,
                    seconds: None,
                },
            ],
        };
        let text = t.to_tsv(true);
        assert!(text.starts_with(RESULT_HEADER));
        assert_eq!(ResultTable::parse(&text).unwrap(), t);
        assert!(!t.to_tsv(false).contains("1.500"));
        assert!(ResultTable::parse("nope\n").is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let kg = crate::synth::planted_movie_kg(&Default::default()).knowledge_graph().unwrap();
        let bench = BenchmarkSet {
            per_predicate: BTreeMap::new(),
            neg_ratio: 2,
            train_fraction: 0.5,
            seed: 0,
            kg_hash: None,
            external: false,
        };
        let opts = ExperimentOptions::default();
        assert!(run_experiment(&kg, &bench, &ExperimentGrid::default(), &opts).is_err());
        let grid = ExperimentGrid {
            train_fractions: vec![1.0],
            ..ExperimentGrid::default()
        };
        assert!(run_experiment(&kg, &bench, &grid, &opts).is_err());
    }
}
