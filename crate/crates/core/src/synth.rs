// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic knowledge graphs for experiments and tests.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kg::{parse_tsv, KnowledgeGraph};

/// ABox and schema as TSV text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticKg {
    pub triples: String,
    pub schema: String,
}

impl SyntheticKg {
    pub fn knowledge_graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::from_records(&parse_tsv(&self.triples, "synthetic")?, &parse_tsv(&self.schema, "synthetic schema")?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub clusters: usize,
    pub films_per_cluster: usize,
    pub actors_per_cluster: usize,
    pub stars_per_film: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            clusters: 20,
            films_per_cluster: 10,
            actors_per_cluster: 11,
            stars_per_film: 3,
            seed: 0,
        }
    }
}

pub const PLANTED_SCHEMA: &str = "Film\tsubClassOf\tWork\n\
    Actor\tsubClassOf\tPerson\n\
    Director\tsubClassOf\tPerson\n\
    director\tdomain\tFilm\n\
    director\trange\tDirector\n\
    starring\tdomain\tWork\n\
    starring\trange\tActor\n\
    producedBy\tdomain\tFilm\n\
    producedBy\trange\tStudio\n\
    birthPlace\tdomain\tPerson\n\
    birthPlace\trange\tCity\n";

/// Typed movie graph of disconnected clusters. Each cluster has one
/// director of all its films, a studio, a home city of all its people and
/// an actor pool that its films draw casts from. A true `director` fact is
/// corroborated through the cast's birthplace or sibling films even with
/// every other `director` edge removed; a cross-cluster pairing has no
/// path at all.
pub fn planted_movie_kg(cfg: &PlantedConfig) -> SyntheticKg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = String::new();
    let mut line = |s: &str, p: &str, o: &str| writeln!(t, "{s}\t{p}\t{o}").unwrap();
    for c in 0..cfg.clusters {
        let director = format!("director_{c}");
        let studio = format!("studio_{c}");
        let city = format!("city_{c}");
        line(&director, "rdf:type", "Director");
        line(&studio, "rdf:type", "Studio");
        line(&city, "rdf:type", "City");
        line(&director, "birthPlace", &city);
        let actors: Vec<String> = (0..cfg.actors_per_cluster).map(|a| format!("actor_{c}_{a}")).collect();
        for a in &actors {
            line(a, "rdf:type", "Actor");
            line(a, "birthPlace", &city);
        }
        for f in 0..cfg.films_per_cluster {
            let film = format!("film_{c}_{f}");
            line(&film, "rdf:type", "Film");
            line(&film, "director", &director);
            line(&film, "producedBy", &studio);
            for a in actors.choose_multiple(&mut rng, cfg.stars_per_film.min(actors.len())) {
                line(&film, "starring", a);
            }
        }
    }
    SyntheticKg {
        triples: t,
        schema: PLANTED_SCHEMA.to_owned(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleKgConfig {
    pub entities: usize,
    pub groups: usize,
    /// Predicates with random facts.
    pub free_predicates: usize,
    /// Predicates defined by an inverse or two-step composition rule over
    /// earlier predicates.
    pub derived_predicates: usize,
    pub free_density: f64,
    /// Chance that a rule-supported pair becomes a fact.
    pub rule_confidence: f64,
    /// Chance of an unsupported pair becoming a fact.
    pub noise_density: f64,
    pub seed: u64,
}

impl Default for RuleKgConfig {
    fn default() -> Self {
        RuleKgConfig {
            entities: 135,
            groups: 10,
            free_predicates: 16,
            derived_predicates: 30,
            free_density: 0.5,
            rule_confidence: 0.95,
            noise_density: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Rule {
    Free,
    Inverse(usize),
    Compose(usize, usize),
}

/// Schema-less graph whose derived predicates follow latent rules, so that
/// facts have path support that corrupted facts mostly lack. Entities are
/// untyped; predicates connect fixed entity groups.
pub fn rule_kg(cfg: &RuleKgConfig) -> SyntheticKg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups = cfg.groups.max(1);
    let members: Vec<Vec<usize>> = (0..groups)
        .map(|g| (0..cfg.entities).filter(|e| e % groups == g).collect())
        .collect();
    let n_preds = cfg.free_predicates + cfg.derived_predicates;
    let mut sig: Vec<(usize, usize)> = Vec::with_capacity(n_preds);
    let mut facts: Vec<BTreeSet<(usize, usize)>> = Vec::with_capacity(n_preds);

    for p in 0..n_preds {
        let (rule, dom, rng_group) = if p < cfg.free_predicates || p == 0 {
            (Rule::Free, rng.gen_range(0..groups), rng.gen_range(0..groups))
        } else if rng.gen_bool(0.3) {
            let q = rng.gen_range(0..p);
            (Rule::Inverse(q), sig[q].1, sig[q].0)
        } else {
            let a = rng.gen_range(0..p);
            let followers: Vec<usize> = (0..p).filter(|&b| sig[b].0 == sig[a].1).collect();
            match followers.choose(&mut rng) {
                Some(&b) => (Rule::Compose(a, b), sig[a].0, sig[b].1),
                None => (Rule::Inverse(a), sig[a].1, sig[a].0),
            }
        };
        let mut set = BTreeSet::new();
        for &x in &members[dom] {
            for &z in &members[rng_group] {
                if x == z {
                    continue;
                }
                let supported = match rule {
                    Rule::Free => false,
                    Rule::Inverse(q) => facts[q].contains(&(z, x)),
                    Rule::Compose(a, b) => facts[a]
                        .range((x, 0)..(x + 1, 0))
                        .any(|&(_, y)| facts[b].contains(&(y, z))),
                };
                let chance = match rule {
                    Rule::Free => cfg.free_density,
                    _ if supported => cfg.rule_confidence,
                    _ => cfg.noise_density,
                };
                if rng.gen_bool(chance) {
                    set.insert((x, z));
                }
            }
        }
        sig.push((dom, rng_group));
        facts.push(set);
    }

    let mut t = String::new();
    for (p, set) in facts.iter().enumerate() {
        for &(x, z) in set {
            writeln!(t, "c{x}\trel{p}\tc{z}").unwrap();
        }
    }
    SyntheticKg {
        triples: t,
        schema: String::new(),
    }
}
