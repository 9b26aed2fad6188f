//! The pattern table: one row per acquired head/expansion pair, with the
//! applicability flag consumed by meta-graph guards.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Pos;

pub const HEADER: &str = "SCHEMA\tELT1\tCAT1\tELT2\tCAT2\tSCORE\tETQ\tOBJET\tSTATUS";

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate row {elt1}/{cat1}/{elt2}/{cat2}/{etq}")]
    Duplicate { elt1: String, cat1: Pos, elt2: String, cat2: Pos, etq: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Schema {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Schema {
    /// Default flag: `+` for nominal predicates, `-` for verbal ones.
    pub fn for_category(cat1: Pos) -> Schema {
        if cat1 == Pos::V {
            Schema::Minus
        } else {
            Schema::Plus
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Schema::Plus => "+",
            Schema::Minus => "-",
        }
    }
}

impl FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" => Ok(Schema::Plus),
            "-" | "−" => Ok(Schema::Minus),
            _ => Err(format!("invalid SCHEMA `{s}`")),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Proposed,
    Accepted,
    Rejected,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Proposed => "proposed",
            RowStatus::Accepted => "accepted",
            RowStatus::Rejected => "rejected",
        }
    }
}

impl FromStr for RowStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(RowStatus::Proposed),
            "accepted" => Ok(RowStatus::Accepted),
            "rejected" => Ok(RowStatus::Rejected),
            _ => Err(format!("invalid STATUS `{s}`")),
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a candidate was seen: document, sentence, head and expansion token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_id: String,
    pub sentence: usize,
    pub head: usize,
    pub expansion: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub schema: Schema,
    pub elt1: String,
    pub cat1: Pos,
    pub elt2: String,
    pub cat2: Pos,
    pub score: f64,
    pub etq: String,
    pub objet: String,
    pub status: RowStatus,
    #[serde(default)]
    pub provenance: BTreeSet<Provenance>,
}

pub type RowKey = (String, Pos, String, Pos, String);

impl PatternRow {
    pub fn key(&self) -> RowKey {
        (self.elt1.clone(), self.cat1, self.elt2.clone(), self.cat2, self.etq.clone())
    }

    /// Stable identifier derived from the row key; identical across runs and
    /// rounds.
    pub fn id(&self) -> String {
        row_id(&self.elt1, self.cat1, &self.elt2, self.cat2, &self.etq)
    }

    /// Slot name: `$n` variables map to `argn`, anything else falls back to
    /// the ETQ label.
    pub fn slot(&self) -> String {
        match self.objet.strip_prefix('$') {
            Some(n) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => format!("arg{n}"),
            _ => self.etq.clone(),
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
            self.schema, self.elt1, self.cat1, self.elt2, self.cat2, self.score, self.etq, self.objet, self.status
        )
    }

    pub fn from_tsv(line: &str) -> Result<PatternRow, String> {
        let f: Vec<&str> = line.split('\t').collect();
        let [schema, elt1, cat1, elt2, cat2, score, etq, objet, status] = f.as_slice() else {
            return Err(format!("expected 9 tab-separated columns, got {}", f.len()));
        };
        for (name, v) in [("ELT1", elt1), ("ELT2", elt2), ("ETQ", etq), ("OBJET", objet)] {
            if v.trim().is_empty() {
                return Err(format!("empty {name}"));
            }
        }
        // spreadsheets export decimal commas
        let score: f64 = score.trim().replace(',', ".").parse().map_err(|_| format!("invalid SCORE `{score}`"))?;
        if !score.is_finite() || score < 0.0 {
            return Err(format!("SCORE must be finite and non-negative, got {score}"));
        }
        Ok(PatternRow {
            schema: schema.trim().parse()?,
            elt1: elt1.trim().to_string(),
            cat1: cat1.trim().parse()?,
            elt2: elt2.trim().to_string(),
            cat2: cat2.trim().parse()?,
            score,
            etq: etq.trim().to_string(),
            objet: objet.trim().to_string(),
            status: status.trim().parse()?,
            provenance: BTreeSet::new(),
        })
    }
}

pub fn row_id(elt1: &str, cat1: Pos, elt2: &str, cat2: Pos, etq: &str) -> String {
    let digest = Sha256::digest(format!("{elt1}\t{cat1}\t{elt2}\t{cat2}\t{etq}").as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Canonical row order: score ascending, then key.
pub fn row_order(a: &PatternRow, b: &PatternRow) -> std::cmp::Ordering {
    a.score.total_cmp(&b.score).then_with(|| a.key().cmp(&b.key()))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternTable {
    rows: Vec<PatternRow>,
}

impl PatternTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: Vec<PatternRow>) -> Result<Self, TableError> {
        let mut t = PatternTable::new();
        for r in rows {
            t.push(r)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, row: PatternRow) -> Result<(), TableError> {
        if self.rows.iter().any(|r| r.key() == row.key()) {
            return Err(TableError::Duplicate {
                elt1: row.elt1,
                cat1: row.cat1,
                elt2: row.elt2,
                cat2: row.cat2,
                etq: row.etq,
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[PatternRow] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [PatternRow] {
        &mut self.rows
    }

    pub fn into_rows(self) -> Vec<PatternRow> {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PatternRow> {
        self.rows.iter().find(|r| r.id() == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut PatternRow> {
        self.rows.iter_mut().find(|r| r.id() == id)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &PatternRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Accepted)
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(row_order);
    }

    pub fn parse(text: &str) -> Result<PatternTable, TableError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim_end() == HEADER => {}
            Some((i, _)) => {
                return Err(TableError::Parse { line: i + 1, message: format!("expected header `{HEADER}`") })
            }
            None => return Ok(PatternTable::new()),
        }
        let mut table = PatternTable::new();
        for (i, line) in lines {
            let row = PatternRow::from_tsv(line.trim_end_matches('\r'))
                .map_err(|message| TableError::Parse { line: i + 1, message })?;
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_tsv());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(elt1: &str, cat1: Pos, elt2: &str, score: f64) -> PatternRow {
        PatternRow {
            schema: Schema::for_category(cat1),
            elt1: elt1.into(),
            cat1,
            elt2: elt2.into(),
            cat2: Pos::N,
            score,
            etq: "entreprise_achetee".into(),
            objet: "$2".into(),
            status: RowStatus::Proposed,
            provenance: BTreeSet::new(),
        }
    }

    #[test]
    fn tsv_layout() {
        let t = PatternTable::from_rows(vec![row("rachat", Pos::N, "groupe", 20.787477)]).unwrap();
        assert_eq!(
            t.to_tsv(),
            "SCHEMA\tELT1\tCAT1\tELT2\tCAT2\tSCORE\tETQ\tOBJET\tSTATUS\n\
             +\trachat\tN\tgroupe\tN\t20.787477\tentreprise_achetee\t$2\tproposed\n"
        );
    }

    #[test]
    fn parses_decimal_comma_and_minus_sign() {
        let text = format!("{HEADER}\n−\tracheter\tV\tusine\tN\t22,668888\tentreprise_achetee\t$2\taccepted\n");
        let t = PatternTable::parse(&text).unwrap();
        let r = &t.rows()[0];
        assert_eq!(r.schema, Schema::Minus);
        assert_eq!(r.score, 22.668888);
        assert_eq!(r.status, RowStatus::Accepted);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(PatternTable::parse("nope\n"), Err(TableError::Parse { line: 1, .. })));
        let dup = format!("{HEADER}\n+\ta\tN\tb\tN\t1\te\t$2\tproposed\n-\ta\tN\tb\tN\t2\te\t$2\taccepted\n");
        assert!(matches!(PatternTable::parse(&dup), Err(TableError::Duplicate { .. })));
        let neg = format!("{HEADER}\n+\ta\tN\tb\tN\t-1\te\t$2\tproposed\n");
        assert!(matches!(PatternTable::parse(&neg), Err(TableError::Parse { line: 2, .. })));
        assert!(PatternTable::parse("").unwrap().is_empty());
    }

    #[test]
    fn ids_are_stable_and_key_based() {
        let a = row("rachat", Pos::N, "activité", 1.0);
        let mut b = row("rachat", Pos::N, "activité", 7.0);
        b.status = RowStatus::Accepted;
        b.schema = Schema::Minus;
        assert_eq!(a.id(), b.id());
        assert_eq!(a.id().len(), 12);
        assert_ne!(a.id(), row("rachat", Pos::N, "usine", 1.0).id());
    }

    #[test]
    fn slot_from_objet() {
        let mut r = row("rachat", Pos::N, "activité", 1.0);
        assert_eq!(r.slot(), "arg2");
        r.objet = "X".into();
        assert_eq!(r.slot(), "entreprise_achetee");
    }

    #[test]
    fn canonical_order() {
        let mut t = PatternTable::from_rows(vec![
            row("reprise", Pos::N, "activité", 2.5),
            row("cession", Pos::N, "c-company", 0.0),
            row("acquérir", Pos::V, "magasin", 2.5),
        ])
        .unwrap();
        t.sort();
        let elts: Vec<&str> = t.rows().iter().map(|r| r.elt1.as_str()).collect();
        assert_eq!(elts, ["cession", "acquérir", "reprise"]);
    }
}
