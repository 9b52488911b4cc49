// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use kgcheck::benchmark::{build_benchmark, external_benchmark, parse_external, BenchmarkSet};
use kgcheck::checker::{collect_paths, score_fact, train, Evidence, FactCheckModel, LabeledPaths};
use kgcheck::config::{ConfigFile, RunConfig, EVIDENCE_KEYS, KEYS};
use kgcheck::embed::{train_fact_embedder, FactEmbedder};
use kgcheck::eval::run_experiment;
use kgcheck::kg::KnowledgeGraph;
use kgcheck::patterns::{extract_schema_patterns, patterns_to_text, PatternCache, SchemaPattern};
use kgcheck::relatedness::{build_relatedness_matrix, EmbeddingTable, RelatednessMatrix};
use kgcheck::synth::{planted_movie_kg, rule_kg, PlantedConfig, RuleKgConfig};
use kgcheck::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "kgcheck",
    version,
    about = "Check knowledge-graph facts against schema-guided evidence paths",
    after_help = config_help()
)]
struct Cli {
    /// `key = value` config file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Set any config key, e.g. `--set l_max=3` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Triple file
    #[arg(long, global = true, value_name = "FILE")]
    triples: Option<String>,
    /// Schema file
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<String>,
    /// Triple format: tsv or nt
    #[arg(long, global = true)]
    format: Option<String>,
    /// Embedding table file
    #[arg(long, global = true, value_name = "FILE")]
    embeddings: Option<String>,
    /// Relatedness matrix file
    #[arg(long, global = true, value_name = "FILE")]
    matrix: Option<String>,
    /// Benchmark file
    #[arg(long, global = true, value_name = "FILE")]
    benchmark: Option<String>,
    /// Model checkpoint
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads; 1 makes every command fully deterministic
    #[arg(long, global = true)]
    threads: Option<String>,
    /// More log output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalise a KG into canonical `triples.tsv` and `schema.tsv`
    Ingest {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train fact embeddings and optionally the predicate relatedness matrix
    Embed {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_name = "FILE")]
        matrix_out: Option<PathBuf>,
        /// Hide the positives of this benchmark while training
        #[arg(long, value_name = "FILE")]
        leave_out: Option<PathBuf>,
        /// skipgram or compositional
        #[arg(long)]
        embedding: Option<String>,
        #[arg(long)]
        dim: Option<String>,
    },
    /// Mine schema patterns for a predicate, best first
    MinePatterns {
        #[arg(long)]
        predicate: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        d: Option<String>,
    },
    /// Print the evidence paths of a fact
    ExtractPaths {
        subject: String,
        predicate: String,
        object: String,
        #[arg(long)]
        l_max: Option<String>,
        /// none, unconstrained or topk
        #[arg(long)]
        fallback: Option<String>,
    },
    /// Build a benchmark of KG positives and corrupted negatives
    Benchmark {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Use labelled `s p o label` facts instead of generating them
        #[arg(long, value_name = "FILE")]
        external: Option<PathBuf>,
        /// Comma-separated predicate names
        #[arg(long)]
        predicates: Option<String>,
        #[arg(long)]
        total_positives: Option<String>,
        #[arg(long)]
        neg_ratio: Option<String>,
        #[arg(long)]
        train_fraction: Option<String>,
    },
    /// Train a classifier on a benchmark's training split
    Train {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// avgpool, maxpool or lstmmaxpool
        #[arg(long)]
        aggregator: Option<String>,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        lr: Option<String>,
    },
    /// Score a fact and print the evidence behind the score
    Check {
        subject: String,
        predicate: String,
        object: String,
    },
    /// Run train/test experiments and write a results table
    Evaluate {
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Write `-` for wall-clock seconds so reruns are byte-identical
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        train_fractions: Option<String>,
        #[arg(long)]
        aggregators: Option<String>,
        #[arg(long)]
        embedding_modes: Option<String>,
        #[arg(long)]
        runs: Option<String>,
    },
    /// Write a synthetic KG (`planted` or `rules`) as `triples.tsv` and `schema.tsv`
    Synth {
        kind: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn config_help() -> String {
    let mut s = String::from("Config keys (`key = value` in --config, or --set key=value):\n");
    for (k, doc) in KEYS {
        s.push_str(&format!("  {k:<22}{doc}\n"));
    }
    s
}

fn put(layer: &mut BTreeMap<String, String>, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        layer.insert(key.to_owned(), v.clone());
    }
}

fn flag_layer(cli: &Cli) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        m.insert(k.trim().replace('-', "_"), v.trim().to_owned());
    }
    for (k, v) in [
        ("triples", &cli.triples),
        ("schema", &cli.schema),
        ("format", &cli.format),
        ("embeddings", &cli.embeddings),
        ("matrix", &cli.matrix),
        ("benchmark", &cli.benchmark),
        ("model", &cli.model),
        ("seed", &cli.seed),
        ("threads", &cli.threads),
    ] {
        put(&mut m, k, v);
    }
    match &cli.command {
        Command::Embed { embedding, dim, .. } => {
            put(&mut m, "embedding", embedding);
            put(&mut m, "dim", dim);
        }
        Command::MinePatterns { k, d, .. } => {
            put(&mut m, "k", k);
            put(&mut m, "d", d);
        }
        Command::ExtractPaths { l_max, fallback, .. } => {
            put(&mut m, "l_max", l_max);
            put(&mut m, "fallback", fallback);
        }
        Command::Benchmark {
            predicates,
            total_positives,
            neg_ratio,
            train_fraction,
            ..
        } => {
            put(&mut m, "predicates", predicates);
            put(&mut m, "total_positives", total_positives);
            put(&mut m, "neg_ratio", neg_ratio);
            put(&mut m, "train_fraction", train_fraction);
        }
        Command::Train { aggregator, epochs, lr, .. } => {
            put(&mut m, "aggregator", aggregator);
            put(&mut m, "epochs", epochs);
            put(&mut m, "lr", lr);
        }
        Command::Evaluate {
            train_fractions,
            aggregators,
            embedding_modes,
            runs,
            ..
        } => {
            put(&mut m, "train_fractions", train_fractions);
            put(&mut m, "aggregators", aggregators);
            put(&mut m, "embedding_modes", embedding_modes);
            put(&mut m, "runs", runs);
        }
        _ => {}
    }
    Ok(m)
}

/// Refuses to write over a configured input file.
fn guard_output(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = [
        &cfg.triples,
        &cfg.schema,
        &cfg.embeddings,
        &cfg.matrix,
        &cfg.benchmark,
        &cfg.model,
    ];
    let target = out.canonicalize().ok();
    for input in inputs.into_iter().flatten() {
        if input == out || (target.is_some() && input.canonicalize().ok() == target) {
            return Err(Error::Config(format!("refusing to overwrite input file {}", out.display())));
        }
    }
    Ok(())
}

fn load_kg(cfg: &RunConfig) -> Result<KnowledgeGraph> {
    KnowledgeGraph::load(cfg.require(&cfg.triples, "triples")?, cfg.format, cfg.schema.as_deref())
}

fn load_matrix(cfg: &RunConfig, kg: &KnowledgeGraph) -> Result<RelatednessMatrix> {
    RelatednessMatrix::load(cfg.require(&cfg.matrix, "matrix")?, &kg.vocab)
}

fn load_benchmark(cfg: &RunConfig, kg: &KnowledgeGraph) -> Result<BenchmarkSet> {
    let bench = BenchmarkSet::load(cfg.require(&cfg.benchmark, "benchmark")?, &kg.vocab)?;
    bench.check_hash(kg)?;
    Ok(bench)
}

fn load_embedder(cfg: &RunConfig, kg: &KnowledgeGraph, mode: kgcheck::embed::EmbeddingMode) -> Result<FactEmbedder> {
    let table = EmbeddingTable::load(cfg.require(&cfg.embeddings, "embeddings")?)?;
    FactEmbedder::from_table(mode, &table, &kg.vocab)
}

fn patterns_for(cfg: &RunConfig, kg: &KnowledgeGraph, m: &RelatednessMatrix, p: kgcheck::kg::PredicateId) -> Result<Vec<SchemaPattern>> {
    if !m.contains(p) {
        return Err(Error::MissingRelatedness(kg.vocab.predicate_name(p).to_owned()));
    }
    match &cfg.pattern_cache {
        Some(dir) => PatternCache::new(dir).get_or_compute(p, cfg.evidence.search, &kg.schema, m, &kg.vocab),
        None => extract_schema_patterns(p, cfg.evidence.search, &kg.schema, m),
    }
}

fn write_out(out: &Path, text: &str) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_owned(),
            source: e,
        })?;
    }
    std::fs::write(out, text).map_err(|e| Error::Io {
        path: out.to_owned(),
        source: e,
    })
}

fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let flags = flag_layer(cli)?;
    let mut cfg = RunConfig::from_layers([&file.values, &flags])?;
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }

    match &cli.command {
        Command::Ingest { out } => {
            let kg = load_kg(&cfg)?;
            guard_output(&cfg, &out.join("triples.tsv"))?;
            guard_output(&cfg, &out.join("schema.tsv"))?;
            write_out(&out.join("triples.tsv"), &kg.export_triples())?;
            write_out(&out.join("schema.tsv"), &kg.export_schema())?;
            println!("entities\t{}", kg.vocab.entities.len());
            println!("predicates\t{}", kg.abox.predicates().len());
            println!("triples\t{}", kg.abox.len());
            println!("type_assertions\t{}", kg.abox.type_assertions().count());
            println!("hash\t{}", kg.content_hash());
        }
        Command::Embed {
            out,
            matrix_out,
            leave_out,
            ..
        } => {
            guard_output(&cfg, out)?;
            if let Some(m) = matrix_out {
                guard_output(&cfg, m)?;
            }
            let kg = load_kg(&cfg)?;
            let abox = match leave_out {
                Some(path) => {
                    let bench = BenchmarkSet::load(path, &kg.vocab)?;
                    bench.check_hash(&kg)?;
                    kg.abox.without(&bench.positives())
                }
                None => kg.abox.clone(),
            };
            let (embedder, losses) = train_fact_embedder(&abox, &cfg.embed_config(cfg.embedding))?;
            embedder.to_table(&kg.vocab)?.save(out)?;
            if let Some(path) = matrix_out {
                let table = embedder.predicate_table(&kg.vocab)?;
                build_relatedness_matrix(&table, &kg.abox.predicates(), &kg.vocab).save(path, &kg.vocab)?;
            }
            println!("epoch\tloss");
            for (i, l) in losses.iter().enumerate() {
                println!("{}\t{l:.6}", i + 1);
            }
        }
        Command::MinePatterns { predicate, out, .. } => {
            let kg = load_kg(&cfg)?;
            let m = load_matrix(&cfg, &kg)?;
            let p = kg.predicate(predicate)?;
            let text = patterns_to_text(&patterns_for(&cfg, &kg, &m, p)?, &kg.vocab);
            match out {
                Some(path) => {
                    guard_output(&cfg, path)?;
                    write_out(path, &text)?;
                }
                None => print!("{text}"),
            }
        }
        Command::ExtractPaths {
            subject,
            predicate,
            object,
            ..
        } => {
            let kg = load_kg(&cfg)?;
            let m = load_matrix(&cfg, &kg)?;
            let fact = kg.triple(subject, predicate, object)?;
            let patterns = patterns_for(&cfg, &kg, &m, fact.p)?;
            let paths = collect_paths(&kg, &m, &cfg.evidence_config(), &patterns, &kg.abox, fact)?;
            print!("{}", paths.dump(&kg.vocab));
        }
        Command::Benchmark { out, external, .. } => {
            guard_output(&cfg, out)?;
            let kg = load_kg(&cfg)?;
            let mut bench = match external {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    let facts = parse_external(&text, &kg.vocab, &path.display().to_string())?;
                    external_benchmark(&facts, cfg.bench.train_fraction, cfg.seed)?
                }
                None => {
                    let mut bc = cfg.bench.clone();
                    bc.seed = cfg.seed;
                    if let Some(names) = &cfg.predicates {
                        bc.predicates = Some(names.iter().map(|n| kg.predicate(n)).collect::<Result<_>>()?);
                    }
                    build_benchmark(&kg, &bc)?
                }
            };
            bench.kg_hash = Some(kg.content_hash());
            bench.save(out, &kg.vocab)?;
            println!("predicate\tpositives\tnegatives");
            for (p, s) in &bench.per_predicate {
                let pos = s.all().filter(|f| f.label).count();
                let neg = s.all().count() - pos;
                println!("{}\t{pos}\t{neg}", kg.vocab.predicate_name(*p));
            }
        }
        Command::Train { out, .. } => {
            guard_output(&cfg, out)?;
            let kg = load_kg(&cfg)?;
            let bench = load_benchmark(&cfg, &kg)?;
            let m = load_matrix(&cfg, &kg)?;
            let embedder = load_embedder(&cfg, &kg, cfg.embedding)?;
            let held_out = kg.abox.without(&bench.positives());
            let evidence = Evidence::new(&kg, &m, &embedder, cfg.evidence_config());
            for &p in bench.per_predicate.keys() {
                evidence.set_patterns(p, patterns_for(&cfg, &kg, &m, p)?);
            }
            let facts: Vec<_> = bench.per_predicate.values().flat_map(|s| s.train()).copied().collect();
            let data = facts
                .par_iter()
                .map(|f| {
                    Ok(LabeledPaths {
                        paths: evidence.embedded(&held_out, f.triple)?.1,
                        label: f.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut model = FactCheckModel::init(
                cfg.aggregator,
                cfg.embedding,
                embedder.fact_dim(),
                cfg.evidence.paths.l_max,
                cfg.hidden,
                cfg.seed,
            )?;
            model.settings = cfg.evidence_settings();
            let (model, report) = train(model, &data, &cfg.train_config())?;
            model.save(out)?;
            println!("epoch\ttrain_loss\tvalidation_loss");
            for (i, l) in report.train_loss.iter().enumerate() {
                let v = report.validation_loss.get(i).map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
                println!("{}\t{l:.6}\t{v}", i + 1);
            }
            println!("best_epoch\t{}", report.best_epoch);
        }
        Command::Check {
            subject,
            predicate,
            object,
        } => {
            let model = FactCheckModel::load(cfg.require(&cfg.model, "model")?)?;
            let stored: BTreeMap<String, String> = model
                .settings
                .iter()
                .filter(|(k, _)| EVIDENCE_KEYS.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            cfg = RunConfig::from_layers([&stored, &file.values, &flags])?;
            let kg = load_kg(&cfg)?;
            let m = load_matrix(&cfg, &kg)?;
            let embedder = load_embedder(&cfg, &kg, model.embedding)?;
            let fact = kg.triple(subject, predicate, object)?;
            let evidence = Evidence::new(&kg, &m, &embedder, cfg.evidence_config());
            evidence.set_patterns(fact.p, patterns_for(&cfg, &kg, &m, fact.p)?);
            print!("{}", score_fact(&model, &evidence, &kg.abox, fact)?.render(&kg.vocab));
        }
        Command::Evaluate { out, no_timing, .. } => {
            if let Some(path) = out {
                guard_output(&cfg, path)?;
            }
            let kg = load_kg(&cfg)?;
            let bench = load_benchmark(&cfg, &kg)?;
            let mut opts = cfg.experiment_options();
            if cfg.matrix.is_some() {
                opts.matrix = Some(load_matrix(&cfg, &kg)?);
            }
            let table = run_experiment(&kg, &bench, &cfg.grid(), &opts)?;
            let text = table.to_tsv(!no_timing);
            match out {
                Some(path) => write_out(path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Synth { kind, out } => {
            let syn = match kind.as_str() {
                "planted" => planted_movie_kg(&PlantedConfig {
                    seed: cfg.seed,
                    ..PlantedConfig::default()
                }),
                "rules" => rule_kg(&RuleKgConfig {
                    seed: cfg.seed,
                    ..RuleKgConfig::default()
                }),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown synthetic graph `{other}` (expected planted or rules)"
                    )))
                }
            };
            write_out(&out.join("triples.tsv"), &syn.triples)?;
            write_out(&out.join("schema.tsv"), &syn.schema)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
        Err(_) => ExitCode::from(2),
    }
}
