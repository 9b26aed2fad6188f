//! Discovery of candidate paraphrase patterns from a seed.
//!
//! For every plain word close enough to the seed head, the next plain word
//! must be close enough to the seed expansion, both must sit in one chunk,
//! and the head must be predicative. Each hit becomes a proposed row scored
//! by the sum of the two proximities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Lexicon, Pos, Sentence};
use crate::semnet::SemanticNet;
use crate::table::{row_order, PatternRow, PatternTable, Provenance, RowKey, RowStatus, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum AcquisitionError {
    #[error("threshold must be a finite non-negative number, got {0}")]
    Threshold(f64),
    #[error("invalid seed `{0}`: expected head/expansion/etq/objet")]
    Seed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedPattern {
    pub head: String,
    pub expansion: String,
    pub etq: String,
    pub objet: String,
}

impl SeedPattern {
    pub fn new(head: &str, expansion: &str, etq: &str, objet: &str) -> Result<Self, AcquisitionError> {
        let seed = SeedPattern {
            head: head.trim().to_string(),
            expansion: expansion.trim().to_string(),
            etq: etq.trim().to_string(),
            objet: objet.trim().to_string(),
        };
        if seed.head.is_empty() || seed.expansion.is_empty() || seed.etq.is_empty() || seed.objet.is_empty() {
            return Err(AcquisitionError::Seed(format!("{head}/{expansion}/{etq}/{objet}")));
        }
        Ok(seed)
    }
}

impl FromStr for SeedPattern {
    type Err = AcquisitionError;

    /// `head/expansion/etq/objet`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split('/').collect::<Vec<_>>().as_slice() {
            [h, e, t, o] => SeedPattern::new(h, e, t, o).map_err(|_| AcquisitionError::Seed(s.to_string())),
            _ => Err(AcquisitionError::Seed(s.to_string())),
        }
    }
}

impl fmt::Display for SeedPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.head, self.expansion, self.etq, self.objet)
    }
}

pub fn predicativity_check(lemma: &str, pos: Pos, lexicon: &Lexicon) -> bool {
    lexicon.is_predicative(lemma, pos)
}

#[derive(Clone, Copy, Debug)]
pub struct Acquirer<'a> {
    net: &'a SemanticNet,
    lexicon: &'a Lexicon,
    threshold: f64,
}

impl<'a> Acquirer<'a> {
    pub fn new(net: &'a SemanticNet, lexicon: &'a Lexicon, threshold: f64) -> Result<Self, AcquisitionError> {
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(AcquisitionError::Threshold(threshold));
        }
        Ok(Acquirer { net, lexicon, threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn acquire_sentence(&self, seed: &SeedPattern, s: &Sentence) -> Vec<PatternRow> {
        let plain: Vec<_> = s.plain_words().collect();
        let mut out = Vec::new();
        for (k, &(i, head)) in plain.iter().enumerate() {
            let Some(prox1) = self.net.proximity(&seed.head, head.key()).value() else {
                continue;
            };
            if prox1 > self.threshold {
                continue;
            }
            let Some(&(j, exp)) = plain.get(k + 1) else {
                break;
            };
            let Some(prox2) = self.net.proximity(&seed.expansion, exp.key()).value() else {
                continue;
            };
            if prox2 > self.threshold {
                continue;
            }
            if !s.chunks.iter().any(|c| c.contains(i) && c.contains(j)) {
                continue;
            }
            if !predicativity_check(head.key(), head.pos, self.lexicon) {
                continue;
            }
            out.push(PatternRow {
                schema: Schema::for_category(head.pos),
                elt1: head.key().to_string(),
                cat1: head.pos,
                elt2: exp.key().to_string(),
                cat2: exp.pos,
                score: prox1 + prox2,
                etq: seed.etq.clone(),
                objet: seed.objet.clone(),
                status: RowStatus::Proposed,
                provenance: BTreeSet::from([Provenance {
                    doc_id: s.doc_id.clone(),
                    sentence: s.index,
                    head: i,
                    expansion: j,
                }]),
            });
        }
        out
    }

    pub fn acquire_corpus(&self, seed: &SeedPattern, sentences: &[Sentence]) -> PatternTable {
        self.acquire_seeds(std::slice::from_ref(seed), sentences)
    }

    /// Union over seeds and sentences, deduplicated on the row key keeping
    /// the lowest score and all provenance, in canonical order.
    pub fn acquire_seeds(&self, seeds: &[SeedPattern], sentences: &[Sentence]) -> PatternTable {
        let rows = seeds.iter().flat_map(|seed| sentences.iter().flat_map(move |s| self.acquire_sentence(seed, s)));
        merge_rows(rows)
    }
}

pub fn merge_rows(rows: impl IntoIterator<Item = PatternRow>) -> PatternTable {
    let mut merged: BTreeMap<RowKey, PatternRow> = BTreeMap::new();
    for row in rows {
        match merged.get_mut(&row.key()) {
            Some(existing) => {
                if row.score < existing.score {
                    existing.score = row.score;
                }
                existing.provenance.extend(row.provenance);
            }
            None => {
                merged.insert(row.key(), row);
            }
        }
    }
    let mut rows: Vec<PatternRow> = merged.into_values().collect();
    rows.sort_by(row_order);
    PatternTable::from_rows(rows).expect("keys are unique after merge")
}
