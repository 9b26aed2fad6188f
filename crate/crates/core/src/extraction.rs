//! Slot filling with a compiled graph.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Pos, Sentence, Token};
use crate::metagraph::CompiledGraph;

pub const RECORDS_HEADER: &str =
    "DOC\tSENT\tSLOT\tFILLER\tPATTERN_ROW\tMATCH_START\tMATCH_END\tFILLER_START\tFILLER_END";

#[derive(Debug, Error, PartialEq)]
#[error("records line {line}: {message}")]
pub struct RecordsError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub doc_id: String,
    pub sentence: usize,
    pub slot: String,
    pub filler: String,
    pub filler_span: (usize, usize),
    pub pattern_row: String,
    pub match_span: (usize, usize),
}

impl ExtractionRecord {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.doc_id,
            self.sentence,
            self.slot,
            self.filler,
            self.pattern_row,
            self.match_span.0,
            self.match_span.1,
            self.filler_span.0,
            self.filler_span.1
        )
    }
}

impl fmt::Display for ExtractionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}

/// Normalized filler text: entities verbatim, other words lowercased, leading
/// determiners and pure determiners dropped.
pub fn normalize_filler(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut leading = true;
    for t in tokens {
        let det = !t.is_entity() && t.has_tag(Pos::D) && (leading || !t.has_tag(Pos::P));
        if det {
            continue;
        }
        leading = false;
        let word = if t.is_entity() { t.raw.clone() } else { t.raw.to_lowercase() };
        if !out.is_empty() && !out.ends_with('\'') {
            out.push(' ');
        }
        out.push_str(&word);
    }
    out
}

/// Leftmost-longest non-overlapping matches, one record per distinct slot of
/// the rows behind each match.
pub fn extract(graph: &CompiledGraph, sentences: &[Sentence]) -> Vec<ExtractionRecord> {
    let mut out = Vec::new();
    for s in sentences {
        let mut pos = 0;
        while pos < s.tokens.len() {
            let Some(m) = graph.match_at(&s.tokens, pos) else {
                pos += 1;
                continue;
            };
            let filler = normalize_filler(&s.tokens[m.capture.0..m.capture.1]);
            let mut slots = BTreeSet::new();
            for o in &m.origins {
                let Some(row) = graph.rows().get(&o.row_id) else {
                    continue;
                };
                let slot = row.slot();
                if slots.insert(slot.clone()) {
                    out.push(ExtractionRecord {
                        doc_id: s.doc_id.clone(),
                        sentence: s.index,
                        slot,
                        filler: filler.clone(),
                        filler_span: m.capture,
                        pattern_row: o.row_id.clone(),
                        match_span: (m.start, m.end),
                    });
                }
            }
            pos = m.end;
        }
    }
    out.sort_by(|a, b| {
        (&a.doc_id, a.sentence, a.match_span.0, &a.slot).cmp(&(&b.doc_id, b.sentence, b.match_span.0, &b.slot))
    });
    out
}

/// Keeps the earliest record per (doc, slot, filler).
pub fn dedupe_per_document(records: &[ExtractionRecord]) -> Vec<ExtractionRecord> {
    let mut seen = BTreeSet::new();
    records.iter().filter(|r| seen.insert((r.doc_id.clone(), r.slot.clone(), r.filler.clone()))).cloned().collect()
}

pub fn records_to_tsv(records: &[ExtractionRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_tsv());
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<ExtractionRecord>, RecordsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with("DOC\t") || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| RecordsError { line: line_no, message: message.to_string() };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(err("expected 9 tab-separated fields"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("`{s}` is not a token index")));
        let r = ExtractionRecord {
            doc_id: f[0].to_string(),
            sentence: num(f[1])?,
            slot: f[2].to_string(),
            filler: f[3].to_string(),
            pattern_row: f[4].to_string(),
            match_span: (num(f[5])?, num(f[6])?),
            filler_span: (num(f[7])?, num(f[8])?),
        };
        if r.match_span.0 >= r.match_span.1
            || r.filler_span.0 >= r.filler_span.1
            || r.filler_span.0 < r.match_span.0
            || r.filler_span.1 > r.match_span.1
        {
            return Err(err("filler span must be a non-empty range inside the match span"));
        }
        if r.doc_id.is_empty() || r.slot.is_empty() || r.filler.is_empty() {
            return Err(err("empty field"));
        }
        out.push(r);
    }
    Ok(out)
}
