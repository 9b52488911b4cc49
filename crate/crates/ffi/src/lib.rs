// SPDX-License-Identifier: Apache-2.0

//! C ABI over `kgcheck`: load a graph, load a trained checker, score facts.
//!
//! Every function returns a [`KgStatus`]; on failure the message is
//! available from [`kg_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use kgcheck::checker::{score_fact, Evidence, FactCheckModel};
use kgcheck::config::{RunConfig, EVIDENCE_KEYS};
use kgcheck::embed::FactEmbedder;
use kgcheck::eval::{auc, ScoredExample};
use kgcheck::kg::{KnowledgeGraph, PredicateId, TripleFormat};
use kgcheck::patterns::{extract_schema_patterns, SchemaPattern};
use kgcheck::relatedness::{EmbeddingTable, RelatednessMatrix};
use kgcheck::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    UnknownName = 5,
    InvalidArgument = 6,
    Checkpoint = 7,
    Config = 8,
    Internal = 9,
    Panic = 10,
}

/// A loaded knowledge graph.
pub struct KgGraph {
    kg: Arc<KnowledgeGraph>,
}

/// A trained model with the embeddings and matrix it scores with.
pub struct KgChecker {
    kg: Arc<KnowledgeGraph>,
    model: FactCheckModel,
    embedder: FactEmbedder,
    matrix: RelatednessMatrix,
    cfg: RunConfig,
    patterns: Mutex<HashMap<PredicateId, Vec<SchemaPattern>>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> KgStatus {
    match e {
        Error::Io { .. } => KgStatus::Io,
        Error::Parse { .. } | Error::Validation(_) => KgStatus::Parse,
        Error::Unknown { .. } | Error::MissingRelatedness(_) => KgStatus::UnknownName,
        Error::DimMismatch { .. } | Error::InvalidArgument(_) => KgStatus::InvalidArgument,
        Error::Checkpoint(_) => KgStatus::Checkpoint,
        Error::Config(_) => KgStatus::Config,
        Error::Training(_) => KgStatus::Internal,
    }
}

struct Fail(KgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            KgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            KgStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(KgStatus::NullArgument, format!("`{what}` is null"))
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn required_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(KgStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn optional_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        required_str(p, what).map(Some)
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn kg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn kg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads triples (`format` "tsv", "nt" or null for tsv) and an optional
/// schema file.
///
/// # Safety
/// String arguments are null or NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kg_graph_load(
    triples_path: *const c_char,
    schema_path: *const c_char,
    format: *const c_char,
    out: *mut *mut KgGraph,
) -> KgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let triples = required_str(triples_path, "triples_path")?;
        let schema = optional_str(schema_path, "schema_path")?.map(PathBuf::from);
        let format: TripleFormat = optional_str(format, "format")?.unwrap_or("tsv").parse()?;
        let kg = KnowledgeGraph::load(triples.as_ref(), format, schema.as_deref())?;
        *out = Box::into_raw(Box::new(KgGraph { kg: Arc::new(kg) }));
        Ok(())
    })
}

/// # Safety
/// `graph` is null or came from [`kg_graph_load`] and was not freed.
#[no_mangle]
pub unsafe extern "C" fn kg_graph_free(graph: *mut KgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Entity, predicate and (non-type) triple counts.
///
/// # Safety
/// `graph` is live; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn kg_graph_counts(
    graph: *const KgGraph,
    entities: *mut usize,
    predicates: *mut usize,
    triples: *mut usize,
) -> KgStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if entities.is_null() || predicates.is_null() || triples.is_null() {
            return Err(null("count output"));
        }
        *entities = g.kg.vocab.entities.len();
        *predicates = g.kg.abox.predicates().len();
        *triples = g.kg.abox.len();
        Ok(())
    })
}

/// Loads a checkpoint with its embedding table and relatedness matrix.
/// Evidence settings come from the checkpoint. The checker keeps its own
/// reference to the graph, which may be freed afterwards.
///
/// # Safety
/// `graph` is live; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kg_checker_load(
    graph: *const KgGraph,
    model_path: *const c_char,
    embeddings_path: *const c_char,
    matrix_path: *const c_char,
    out: *mut *mut KgChecker,
) -> KgStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = FactCheckModel::load(required_str(model_path, "model_path")?.as_ref())?;
        let table = EmbeddingTable::load(required_str(embeddings_path, "embeddings_path")?.as_ref())?;
        let embedder = FactEmbedder::from_table(model.embedding, &table, &g.kg.vocab)?;
        let matrix = RelatednessMatrix::load(required_str(matrix_path, "matrix_path")?.as_ref(), &g.kg.vocab)?;
        let stored: BTreeMap<String, String> = model
            .settings
            .iter()
            .filter(|(k, _)| EVIDENCE_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let cfg = RunConfig::from_layers([&stored])?;
        *out = Box::into_raw(Box::new(KgChecker {
            kg: g.kg.clone(),
            model,
            embedder,
            matrix,
            cfg,
            patterns: Mutex::new(HashMap::new()),
        }));
        Ok(())
    })
}

/// # Safety
/// `checker` is null or came from [`kg_checker_load`] and was not freed.
#[no_mangle]
pub unsafe extern "C" fn kg_checker_free(checker: *mut KgChecker) {
    if !checker.is_null() {
        drop(Box::from_raw(checker));
    }
}

/// Scores `(subject, predicate, object)`; `label` is 1 when the score
/// exceeds 0.5.
///
/// # Safety
/// `checker` is live; strings are NUL-terminated; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn kg_checker_score(
    checker: *const KgChecker,
    subject: *const c_char,
    predicate: *const c_char,
    object: *const c_char,
    score: *mut f64,
    label: *mut i32,
) -> KgStatus {
    guard(|| {
        let c = checker.as_ref().ok_or_else(|| null("checker"))?;
        if score.is_null() || label.is_null() {
            return Err(null("score output"));
        }
        let fact = c.kg.triple(
            required_str(subject, "subject")?,
            required_str(predicate, "predicate")?,
            required_str(object, "object")?,
        )?;
        let evidence = Evidence::new(&c.kg, &c.matrix, &c.embedder, c.cfg.evidence_config());
        let patterns = {
            let mut memo = c.patterns.lock().unwrap_or_else(|p| p.into_inner());
            match memo.get(&fact.p) {
                Some(p) => p.clone(),
                None => {
                    if !c.matrix.contains(fact.p) {
                        return Err(Error::MissingRelatedness(c.kg.vocab.predicate_name(fact.p).to_owned()).into());
                    }
                    let p = extract_schema_patterns(fact.p, c.cfg.evidence.search, &c.kg.schema, &c.matrix)?;
                    memo.insert(fact.p, p.clone());
                    p
                }
            }
        };
        evidence.set_patterns(fact.p, patterns);
        let verdict = score_fact(&c.model, &evidence, &c.kg.abox, fact)?;
        *score = verdict.score;
        *label = i32::from(verdict.label);
        Ok(())
    })
}

/// ROC AUC of `n` scores against 0/1 labels, ties counting one half.
///
/// # Safety
/// `scores` and `labels` point to `n` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kg_auc(scores: *const f64, labels: *const i32, n: usize, out: *mut f64) -> KgStatus {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return Err(null("auc argument"));
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l = std::slice::from_raw_parts(labels, n);
        let examples: Vec<ScoredExample> = s
            .iter()
            .zip(l)
            .map(|(&score, &label)| ScoredExample { score, label: label != 0 })
            .collect();
        *out = auc(&examples)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(kg_last_error_message()) }.to_str().unwrap().to_owned()
    }

    #[test]
    fn auc_matches_core() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [1, 0, 1, 0];
        let mut out = 0.0;
        assert_eq!(unsafe { kg_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) }, KgStatus::Ok);
        assert_eq!(out, 0.75);
        let ones = [1, 1, 1, 1];
        assert_eq!(
            unsafe { kg_auc(scores.as_ptr(), ones.as_ptr(), 4, &mut out) },
            KgStatus::InvalidArgument
        );
        assert!(last_error().contains("both"));
    }

    #[test]
    fn null_and_missing_inputs() {
        let mut g = ptr::null_mut();
        assert_eq!(
            unsafe { kg_graph_load(ptr::null(), ptr::null(), ptr::null(), &mut g) },
            KgStatus::NullArgument
        );
        let missing = c("/nonexistent/triples.tsv");
        assert_eq!(unsafe { kg_graph_load(missing.as_ptr(), ptr::null(), ptr::null(), &mut g) }, KgStatus::Io);
        assert!(last_error().contains("/nonexistent"));
        let bad_format = c("xml");
        assert_ne!(
            unsafe { kg_graph_load(missing.as_ptr(), ptr::null(), bad_format.as_ptr(), &mut g) },
            KgStatus::Ok
        );
        assert!(g.is_null());
        unsafe {
            kg_graph_free(ptr::null_mut());
            kg_checker_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_is_a_string() {
        let v = unsafe { CStr::from_ptr(kg_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn graph_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        std::fs::write(&path, "a\tp\tb\nb\tq\tc\na\trdf:type\tX\n").unwrap();
        let p = c(path.to_str().unwrap());
        let mut g = ptr::null_mut();
        assert_eq!(unsafe { kg_graph_load(p.as_ptr(), ptr::null(), ptr::null(), &mut g) }, KgStatus::Ok);
        let (mut e, mut pr, mut t) = (0, 0, 0);
        assert_eq!(unsafe { kg_graph_counts(g, &mut e, &mut pr, &mut t) }, KgStatus::Ok);
        assert_eq!((e, pr, t), (3, 2, 2));
        unsafe { kg_graph_free(g) };
    }
}
