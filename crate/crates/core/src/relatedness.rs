// SPDX-License-Identifier: Apache-2.0

//! Embedding tables, the predicate relatedness matrix and pattern scoring.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{read_file, write_file, Error, Result};
use crate::kg::{PredicateId, Vocabulary};

/// String-keyed table of equal-length real vectors.
///
/// File form: a `dim=<d>` header line followed by `<key>\t<v1> ... <vd>`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            keys: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Inserts or overwrites `key`.
    pub fn insert(&mut self, key: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite component {bad} for `{key}`")));
        }
        match self.index.get(key) {
            Some(&row) => self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(key.to_owned(), self.keys.len());
                self.keys.push(key.to_owned());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing `dim=<d>` header"))?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::parse(origin, 1, "expected `dim=<d>` header"))?;
        let mut table = EmbeddingTable::new(dim)?;
        let mut buf = Vec::with_capacity(dim);
        for (idx, line) in lines {
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected `<key>\\t<values>`"))?;
            buf.clear();
            for tok in values.split_ascii_whitespace() {
                buf.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::parse(origin, idx + 1, format!("bad number `{tok}`")))?,
                );
            }
            table
                .insert(key, &buf)
                .map_err(|e| Error::parse(origin, idx + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={}\n", self.dim);
        for (row, key) in self.keys.iter().enumerate() {
            out.push_str(key);
            out.push('\t');
            for (i, x) in self.data[row * self.dim..(row + 1) * self.dim].iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_text())
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Symmetric predicate-by-predicate cosine relatedness.
#[derive(Clone, Debug, PartialEq)]
pub struct RelatednessMatrix {
    preds: Vec<PredicateId>,
    pos: HashMap<PredicateId, usize>,
    scores: Vec<f64>,
}

impl RelatednessMatrix {
    fn with_predicates(mut preds: Vec<PredicateId>) -> Self {
        preds.sort_unstable();
        preds.dedup();
        let pos = preds.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let n = preds.len();
        RelatednessMatrix {
            preds,
            pos,
            scores: vec![0.0; n * n],
        }
    }

    pub fn predicates(&self) -> &[PredicateId] {
        &self.preds
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn contains(&self, p: PredicateId) -> bool {
        self.pos.contains_key(&p)
    }

    pub fn get(&self, a: PredicateId, b: PredicateId) -> Option<f64> {
        let i = *self.pos.get(&a)?;
        let j = *self.pos.get(&b)?;
        Some(self.scores[i * self.preds.len() + j])
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.preds.len();
        self.scores[i * n + j] = v;
        self.scores[j * n + i] = v;
    }

    /// Upper-triangle TSV, diagonal included: `<p_i>\t<p_j>\t<score>`.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let n = self.preds.len();
        let mut out = String::new();
        for i in 0..n {
            for j in i..n {
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    vocab.predicate_name(self.preds[i]),
                    vocab.predicate_name(self.preds[j]),
                    self.scores[i * n + j]
                )
                .unwrap();
            }
        }
        out
    }

    /// Reads a matrix file. Predicates unknown to `vocab` are skipped; a
    /// missing diagonal entry defaults to 1 and a missing pair to 0.
    pub fn parse(text: &str, vocab: &Vocabulary, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut skipped = 0usize;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(origin, idx + 1, "expected `<p_i>\\t<p_j>\\t<score>`"));
            }
            let score: f64 = f[2]
                .parse()
                .map_err(|_| Error::parse(origin, idx + 1, format!("bad score `{}`", f[2])))?;
            if !score.is_finite() {
                return Err(Error::parse(origin, idx + 1, "non-finite score"));
            }
            match (vocab.predicate_id(f[0]), vocab.predicate_id(f[1])) {
                (Some(a), Some(b)) => entries.push((a, b, score)),
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{origin}: skipped {skipped} entries naming predicates absent from the graph");
        }
        let mut m = Self::with_predicates(entries.iter().flat_map(|&(a, b, _)| [a, b]).collect());
        for i in 0..m.preds.len() {
            m.set(i, i, 1.0);
        }
        for (a, b, s) in entries {
            let (i, j) = (m.pos[&a], m.pos[&b]);
            m.set(i, j, s);
        }
        Ok(m)
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        Self::parse(&read_file(path)?, vocab, &path.display().to_string())
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        write_file(path, self.to_text(vocab))
    }

    /// Short content hash used to key pattern caches.
    pub fn hash(&self, vocab: &Vocabulary) -> String {
        let digest = Sha256::digest(self.to_text(vocab).as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Pairwise cosine over `preds`, looking vectors up by predicate name.
/// Predicates without a vector get a zero vector, hence relatedness 0.
pub fn build_relatedness_matrix(
    emb: &EmbeddingTable,
    preds: &[PredicateId],
    vocab: &Vocabulary,
) -> RelatednessMatrix {
    let mut m = RelatednessMatrix::with_predicates(preds.to_vec());
    let zero = vec![0.0; emb.dim()];
    let vectors: Vec<&[f64]> = m
        .preds
        .iter()
        .map(|&p| {
            let name = vocab.predicate_name(p);
            emb.get(name).unwrap_or_else(|| {
                log::warn!("no embedding for predicate `{name}`; using a zero vector");
                &zero
            })
        })
        .collect();
    let n = m.preds.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| cosine(vectors[i], vectors[j]).expect("equal dims")).collect())
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m.set(i, i + off, v);
        }
    }
    m
}

/// The `k` predicates most related to `p`: `p` first, then by descending
/// relatedness with ties on ascending handle.
pub fn top_k_predicates(m: &RelatednessMatrix, p: PredicateId, k: usize) -> Result<Vec<PredicateId>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let &row = m
        .pos
        .get(&p)
        .ok_or_else(|| Error::MissingRelatedness(p.to_string()))?;
    let n = m.preds.len();
    let mut others: Vec<(f64, PredicateId)> = (0..n)
        .filter(|&j| j != row)
        .map(|j| (m.scores[row * n + j], m.preds[j]))
        .collect();
    others.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(std::iter::once(p)
        .chain(others.into_iter().map(|(_, q)| q))
        .take(k)
        .collect())
}

/// Mean relatedness of `p` to each predicate of a pattern, with multiplicity.
pub fn path_relatedness(p: PredicateId, pattern: &[PredicateId], m: &RelatednessMatrix) -> Result<f64> {
    if pattern.is_empty() {
        return Err(Error::InvalidArgument("pattern has no predicates".into()));
    }
    let mut sum = 0.0;
    for &q in pattern {
        sum += m
            .get(p, q)
            .ok_or_else(|| Error::MissingRelatedness(q.to_string()))?;
    }
    Ok(sum / pattern.len() as f64)
}
