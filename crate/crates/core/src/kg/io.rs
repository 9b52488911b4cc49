// SPDX-License-Identifier: Apache-2.0

//! Line-oriented readers for triple files.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TripleFormat {
    /// `<s>\t<p>\t<o>` per line, `#` comments.
    #[default]
    Tsv,
    /// Minimal N-Triples: IRIs, blank nodes and literals; literals stay opaque.
    NTriples,
}

impl FromStr for TripleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(TripleFormat::Tsv),
            "ntriples" | "nt" => Ok(TripleFormat::NTriples),
            other => Err(Error::InvalidArgument(format!(
                "unknown triple format `{other}` (expected tsv or ntriples)"
            ))),
        }
    }
}

/// One parsed input record with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTriple {
    pub s: String,
    pub p: String,
    pub o: String,
    pub line: usize,
}

pub fn parse_triples(text: &str, format: TripleFormat, origin: &str) -> Result<Vec<RawTriple>> {
    match format {
        TripleFormat::Tsv => parse_tsv(text, origin),
        TripleFormat::NTriples => parse_ntriples(text, origin),
    }
}

pub fn parse_tsv(text: &str, origin: &str) -> Result<Vec<RawTriple>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(
                origin,
                idx + 1,
                format!("expected 3 non-empty tab-separated fields, found {}", fields.len()),
            ));
        }
        out.push(RawTriple {
            s: fields[0].to_owned(),
            p: fields[1].to_owned(),
            o: fields[2].to_owned(),
            line: idx + 1,
        });
    }
    Ok(out)
}

pub fn parse_ntriples(text: &str, origin: &str) -> Result<Vec<RawTriple>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::parse(origin, idx + 1, msg.to_owned());
        let mut rest = line;
        let mut terms = Vec::with_capacity(3);
        for _ in 0..3 {
            let (term, tail) = next_term(rest).map_err(|m| err(&m))?;
            terms.push(term);
            rest = tail.trim_start();
        }
        if !rest.starts_with('.') || !rest[1..].trim().is_empty() && !rest[1..].trim().starts_with('#') {
            return Err(err("expected terminating `.`"));
        }
        let o = terms.pop().unwrap();
        let p = terms.pop().unwrap();
        let s = terms.pop().unwrap();
        if s.starts_with('"') || p.starts_with('"') || p.starts_with("_:") {
            return Err(err("literal or blank node in subject/predicate position"));
        }
        out.push(RawTriple { s, p, o, line: idx + 1 });
    }
    Ok(out)
}

fn next_term(input: &str) -> std::result::Result<(String, &str), String> {
    let input = input.trim_start();
    if let Some(rest) = input.strip_prefix('<') {
        let end = rest.find('>').ok_or("unterminated IRI")?;
        return Ok((rest[..end].to_owned(), &rest[end + 1..]));
    }
    if input.starts_with("_:") {
        let end = input
            .find(|c: char| c.is_whitespace())
            .unwrap_or(input.len());
        return Ok((input[..end].to_owned(), &input[end..]));
    }
    if input.starts_with('"') {
        let bytes = input.as_bytes();
        let mut i = 1;
        let mut escaped = false;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' if !escaped => escaped = true,
                b'"' if !escaped => break,
                _ => escaped = false,
            }
            i += 1;
        }
        if i >= bytes.len() {
            return Err("unterminated literal".into());
        }
        let mut end = i + 1;
        let tail = &input[end..];
        if let Some(lang) = tail.strip_prefix('@') {
            end += 1 + lang
                .find(|c: char| c.is_whitespace())
                .unwrap_or(lang.len());
        } else if let Some(dt) = tail.strip_prefix("^^<") {
            let close = dt.find('>').ok_or("unterminated datatype IRI")?;
            end += 3 + close + 1;
        }
        return Ok((input[..end].to_owned(), &input[end..]));
    }
    Err(format!(
        "unexpected token near `{}`",
        input.chars().take(16).collect::<String>()
    ))
}

fn local_name(term: &str) -> &str {
    term.rsplit(['#', '/', ':']).next().unwrap_or(term)
}

/// Recognizes the spellings of `rdf:type`.
pub fn is_type_predicate(term: &str) -> bool {
    matches!(term, "a" | "type" | "rdf:type")
        || (term.starts_with("http") && term.ends_with("rdf-syntax-ns#type"))
}

/// The four schema properties of the supported RDFS subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemaProperty {
    SubClassOf,
    SubPropertyOf,
    Domain,
    Range,
}

impl SchemaProperty {
    pub fn parse(term: &str) -> Option<Self> {
        let plain = term.starts_with("rdfs:")
            || term.starts_with("http://www.w3.org/2000/01/rdf-schema#")
            || !term.contains([':', '/', '#']);
        if !plain {
            return None;
        }
        match local_name(term) {
            "subClassOf" => Some(SchemaProperty::SubClassOf),
            "subPropertyOf" => Some(SchemaProperty::SubPropertyOf),
            "domain" => Some(SchemaProperty::Domain),
            "range" => Some(SchemaProperty::Range),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SchemaProperty::SubClassOf => "subClassOf",
            SchemaProperty::SubPropertyOf => "subPropertyOf",
            SchemaProperty::Domain => "domain",
            SchemaProperty::Range => "range",
        }
    }
}
