// SPDX-License-Identifier: Apache-2.0

//! Knowledge-graph storage: interning, the indexed ABox, the schema
//! closure and the schema graph.

mod abox;
mod intern;
pub mod io;
mod tbox;

use std::path::Path;

use sha2::{Digest, Sha256};

pub use abox::{ABoxGraph, Direction, GraphView, LeaveOutView, Triple};
pub use intern::{ClassId, EntityId, Interner, PredicateId, Vocabulary, THING, THING_NAME};
pub use io::{parse_ntriples, parse_triples, parse_tsv, RawTriple, SchemaProperty, TripleFormat};
pub use tbox::{
    build_tbox_graph, rdfs_closure, Axiom, ClassHierarchy, EdgeLabel, SchemaEdge, TBoxGraph, TBoxSpec,
};

use crate::error::{read_file, Result};

fn build_abox(records: &[RawTriple], vocab: &mut Vocabulary) -> ABoxGraph {
    let mut triples = Vec::with_capacity(records.len());
    let mut types = Vec::new();
    for r in records {
        if io::is_type_predicate(&r.p) {
            vocab.type_label.get_or_insert_with(|| r.p.clone());
            types.push((vocab.entity(&r.s), vocab.class(&r.o)));
        } else {
            triples.push(Triple::new(vocab.entity(&r.s), vocab.predicate(&r.p), vocab.entity(&r.o)));
        }
    }
    ABoxGraph::new(vocab.entities.len(), triples, types)
}

/// Loads a triple file into a fresh vocabulary. `rdf:type` records feed
/// the type index rather than the triple set.
pub fn load_triples(path: &Path, format: TripleFormat) -> Result<(Vocabulary, ABoxGraph)> {
    let text = read_file(path)?;
    let records = io::parse_triples(&text, format, &path.display().to_string())?;
    let mut vocab = Vocabulary::new();
    let abox = build_abox(&records, &mut vocab);
    Ok((vocab, abox))
}

/// ABox, asserted and closed TBox, and the schema graph over one vocabulary.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    pub vocab: Vocabulary,
    pub abox: ABoxGraph,
    /// Axioms as read, used for export.
    pub asserted: TBoxSpec,
    /// Closed spec; every ABox predicate is a declared property.
    pub tbox: TBoxSpec,
    pub schema: TBoxGraph,
}

impl KnowledgeGraph {
    pub fn from_records(abox: &[RawTriple], schema: &[RawTriple]) -> Result<Self> {
        let mut vocab = Vocabulary::new();
        let abox = build_abox(abox, &mut vocab);
        let asserted = TBoxSpec::from_records(schema, &mut vocab, "schema")?;
        Ok(Self::assemble(vocab, abox, asserted))
    }

    pub fn assemble(vocab: Vocabulary, abox: ABoxGraph, asserted: TBoxSpec) -> Self {
        let mut declared = asserted.clone();
        declared.properties.extend(abox.predicates());
        declared.classes.extend(abox.type_assertions().map(|(_, c)| c));
        let tbox = rdfs_closure(&declared);
        let schema = build_tbox_graph(&tbox);
        KnowledgeGraph {
            vocab,
            abox,
            asserted,
            tbox,
            schema,
        }
    }

    pub fn load(triples: &Path, format: TripleFormat, schema: Option<&Path>) -> Result<Self> {
        let text = read_file(triples)?;
        let abox = io::parse_triples(&text, format, &triples.display().to_string())?;
        let schema_records = match schema {
            Some(path) => io::parse_tsv(&read_file(path)?, &path.display().to_string())?,
            None => Vec::new(),
        };
        let mut vocab = Vocabulary::new();
        let abox = build_abox(&abox, &mut vocab);
        let origin = schema.map(|p| p.display().to_string()).unwrap_or_default();
        let asserted = TBoxSpec::from_records(&schema_records, &mut vocab, &origin)?;
        Ok(Self::assemble(vocab, abox, asserted))
    }

    /// Replaces the ABox, keeping vocabulary and schema.
    pub fn with_abox(&self, abox: ABoxGraph) -> Self {
        KnowledgeGraph {
            vocab: self.vocab.clone(),
            abox,
            asserted: self.asserted.clone(),
            tbox: self.tbox.clone(),
            schema: self.schema.clone(),
        }
    }

    pub fn export_triples(&self) -> String {
        export_triples(&self.vocab, &self.abox)
    }

    pub fn export_schema(&self) -> String {
        self.asserted.export(&self.vocab)
    }

    /// Content hash of the exported triples and schema.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.export_triples().as_bytes());
        h.update(b"\0");
        h.update(self.export_schema().as_bytes());
        hex::encode(&h.finalize()[..16])
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.vocab
            .entity_id(name)
            .ok_or_else(|| crate::Error::unknown("entity", name))
    }

    pub fn predicate(&self, name: &str) -> Result<PredicateId> {
        self.vocab
            .predicate_id(name)
            .ok_or_else(|| crate::Error::unknown("predicate", name))
    }

    pub fn triple(&self, s: &str, p: &str, o: &str) -> Result<Triple> {
        Ok(Triple::new(self.entity(s)?, self.predicate(p)?, self.entity(o)?))
    }
}

/// Sorted TSV export of triples and type assertions.
pub fn export_triples(vocab: &Vocabulary, abox: &ABoxGraph) -> String {
    let type_label = vocab.type_label.as_deref().unwrap_or("rdf:type");
    let mut lines: Vec<String> = abox.triples().iter().map(|t| t.display(vocab)).collect();
    lines.extend(
        abox.type_assertions()
            .map(|(e, c)| format!("{}\t{type_label}\t{}", vocab.entity_name(e), vocab.class_name(c))),
    );
    lines.sort();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
