//! Slot-level scoring against gold annotations and miss diagnosis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::extraction::{extract, normalize_filler, ExtractionRecord};
use crate::metagraph::CompiledGraph;
use crate::semnet::SemanticNet;
use crate::table::PatternTable;

#[derive(Debug, Error, PartialEq)]
pub enum GoldError {
    #[error("gold line {line}: expected DOC<TAB>SLOT<TAB>FILLER")]
    Format { line: usize },
    #[error("gold line {line}: duplicate annotation")]
    Duplicate { line: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub doc_id: String,
    pub slot: String,
    pub filler: String,
}

pub fn parse_gold(text: &str) -> Result<Vec<GoldAnnotation>, GoldError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("DOC\t") {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [doc, slot, filler] = f.as_slice() else {
            return Err(GoldError::Format { line: i + 1 });
        };
        if doc.is_empty() || slot.is_empty() || filler.is_empty() {
            return Err(GoldError::Format { line: i + 1 });
        }
        let g = GoldAnnotation { doc_id: doc.to_string(), slot: slot.to_string(), filler: filler.to_string() };
        if !seen.insert(g.clone()) {
            return Err(GoldError::Duplicate { line: i + 1 });
        }
        out.push(g);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotScore {
    pub slot: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SlotScore {
    pub fn from_counts(slot: &str, tp: usize, fp: usize, fn_: usize) -> SlotScore {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        SlotScore { slot: slot.to_string(), tp, fp, fn_, precision, recall, f }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            self.slot, self.tp, self.fp, self.fn_, self.precision, self.recall, self.f
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub slots: Vec<SlotScore>,
    pub total: SlotScore,
    pub missed: Vec<GoldAnnotation>,
}

pub const REPORT_HEADER: &str = "SLOT\tTP\tFP\tFN\tP\tR\tF";

impl EvaluationReport {
    pub fn slot(&self, slot: &str) -> Option<&SlotScore> {
        self.slots.iter().find(|s| s.slot == slot)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for s in &self.slots {
            out.push_str(&s.to_tsv());
            out.push('\n');
        }
        out.push_str(&self.total.to_tsv());
        out.push('\n');
        out
    }
}

/// Exact match on (doc, slot, filler). Duplicate predictions count once.
pub fn evaluate(records: &[ExtractionRecord], gold: &[GoldAnnotation]) -> EvaluationReport {
    let predicted: BTreeSet<(&str, &str, &str)> =
        records.iter().map(|r| (r.doc_id.as_str(), r.slot.as_str(), r.filler.as_str())).collect();
    let expected: BTreeSet<(&str, &str, &str)> =
        gold.iter().map(|g| (g.doc_id.as_str(), g.slot.as_str(), g.filler.as_str())).collect();

    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for p in &predicted {
        let c = counts.entry(p.1).or_default();
        if expected.contains(p) {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    let mut missed = Vec::new();
    for g in &expected {
        if !predicted.contains(g) {
            counts.entry(g.1).or_default().2 += 1;
            missed.push(GoldAnnotation { doc_id: g.0.to_string(), slot: g.1.to_string(), filler: g.2.to_string() });
        }
    }
    let slots: Vec<SlotScore> =
        counts.iter().map(|(s, &(tp, fp, fn_))| SlotScore::from_counts(s, tp, fp, fn_)).collect();
    let (tp, fp, fn_) = counts.values().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    EvaluationReport { slots, total: SlotScore::from_counts("total", tp, fp, fn_), missed }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissCause {
    NetGap,
    TransformationGap,
    Other,
}

impl MissCause {
    pub fn as_str(self) -> &'static str {
        match self {
            MissCause::NetGap => "net-gap",
            MissCause::TransformationGap => "transformation-gap",
            MissCause::Other => "other",
        }
    }
}

impl fmt::Display for MissCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissReport {
    pub doc_id: String,
    pub sentence: usize,
    pub slot: String,
    pub cause: MissCause,
}

pub const MISSES_HEADER: &str = "DOC\tSENT\tSLOT\tCAUSE";

pub fn misses_to_tsv(misses: &[MissReport]) -> String {
    let mut out = format!("{MISSES_HEADER}\n");
    for m in misses {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", m.doc_id, m.sentence, m.slot, m.cause));
    }
    out
}

/// Whether some token span normalizes to `filler`.
fn locate(s: &Sentence, filler: &str) -> bool {
    let n = s.tokens.len();
    (0..n).any(|i| (i + 1..=n.min(i + 8)).any(|j| normalize_filler(&s.tokens[i..j]) == filler))
}

pub struct MissContext<'a> {
    pub sentences: &'a [Sentence],
    pub table: &'a PatternTable,
    pub net: &'a SemanticNet,
    pub threshold: f64,
    pub graph: &'a CompiledGraph,
}

/// Explains each missed gold annotation. The gold sentence is the first
/// sentence of the document containing the filler; unlocatable misses are
/// reported against sentence 0 as `other`.
pub fn classify_misses(misses: &[GoldAnnotation], ctx: &MissContext<'_>) -> Vec<MissReport> {
    let mut out = Vec::new();
    for miss in misses {
        let sentence = ctx.sentences.iter().find(|s| s.doc_id == miss.doc_id && locate(s, &miss.filler));
        let Some(sentence) = sentence else {
            out.push(MissReport {
                doc_id: miss.doc_id.clone(),
                sentence: 0,
                slot: miss.slot.clone(),
                cause: MissCause::Other,
            });
            continue;
        };
        let near =
            |lemma: &str| sentence.plain_words().any(|(_, t)| ctx.net.proximity(lemma, t.key()).within(ctx.threshold));
        let reachable = ctx.table.accepted().any(|r| r.slot() == miss.slot && near(&r.elt1) && near(&r.elt2));
        let cause = if !reachable {
            MissCause::NetGap
        } else if extract(ctx.graph, std::slice::from_ref(sentence)).iter().all(|r| r.slot != miss.slot) {
            MissCause::TransformationGap
        } else {
            MissCause::Other
        };
        out.push(MissReport { doc_id: miss.doc_id.clone(), sentence: sentence.index, slot: miss.slot.clone(), cause });
    }
    out
}
