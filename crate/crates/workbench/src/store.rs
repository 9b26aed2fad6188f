//! Event-sourced state for validation rounds.
//!
//! Two append-only JSON-lines logs live in the data directory:
//! `proposals.jsonl` (rounds, their proposed rows and round closures) and
//! `decisions.jsonl` (analyst verdicts). The in-memory state is always the
//! replay of both logs. A final line without its newline is an interrupted
//! write; it is dropped on open and cut from the file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use parafact::acquisition::AcquisitionError;
use parafact::corpus::{Analyzer, Sentence};
use parafact::table::{row_order, PatternRow, PatternTable, RowStatus};
use parafact::{Acquirer, SeedPattern, SemanticNet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROPOSALS_LOG: &str = "proposals.jsonl";
pub const DECISIONS_LOG: &str = "decisions.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
}

impl From<AcquisitionError> for StoreError {
    fn from(e: AcquisitionError) -> Self {
        StoreError::Validation(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn status(self) -> RowStatus {
        match self {
            Verdict::Accept => RowStatus::Accepted,
            Verdict::Reject => RowStatus::Rejected,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub candidate_id: String,
    pub verdict: Verdict,
    pub annotator: String,
    pub at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum ProposalEvent {
    Round { id: u64, seeds: Vec<SeedPattern>, threshold: f64, created_at: DateTime<Utc> },
    Proposal { round: u64, row: PatternRow },
    Close { round: u64, at: DateTime<Utc> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub proposed: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// accepted / proposed
    pub acceptance_rate: f64,
    /// accepted / number of seeds
    pub new_patterns_per_seed: f64,
    /// `new_patterns_per_seed` truncated to two decimals
    pub new_patterns_per_seed_display: String,
}

impl RoundStats {
    pub fn compute(proposed: usize, accepted: usize, rejected: usize, seeds: usize) -> RoundStats {
        let acceptance_rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
        let per_seed = if seeds == 0 { 0.0 } else { accepted as f64 / seeds as f64 };
        RoundStats {
            proposed,
            accepted,
            rejected,
            acceptance_rate,
            new_patterns_per_seed: per_seed,
            new_patterns_per_seed_display: per_seed_display(accepted, seeds),
        }
    }
}

/// `accepted / seeds` truncated (not rounded) to two decimals: 25/6 → "4.16".
pub fn per_seed_display(accepted: usize, seeds: usize) -> String {
    if seeds == 0 {
        return "0.00".into();
    }
    let hundredths = accepted * 100 / seeds;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub id: u64,
    pub seeds: Vec<SeedPattern>,
    pub threshold: f64,
    pub created_at: DateTime<Utc>,
    pub closed: bool,
    pub stats: RoundStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub round: u64,
    #[serde(flatten)]
    pub row: PatternRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub sentence: usize,
    pub text: String,
    /// sentence text with the head and expansion wrapped in `[` `]`
    pub marked: String,
    pub head: usize,
    pub expansion: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Promotion {
    pub round: u64,
    pub rows: Vec<PatternRow>,
    pub table: String,
    pub seeds: Vec<SeedPattern>,
}

/// What a round needs to run acquisition and show evidence.
pub struct Resources {
    pub net: SemanticNet,
    pub analyzer: Analyzer,
    pub sentences: Vec<Sentence>,
}

impl Resources {
    pub fn new(net: SemanticNet, analyzer: Analyzer, docs: &[(String, String)]) -> Resources {
        let sentences = analyzer.analyze_corpus(docs);
        Resources { net, analyzer, sentences }
    }

    fn sentence(&self, doc: &str, index: usize) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.doc_id == doc && s.index == index)
    }
}

#[derive(Clone, Debug)]
struct RoundState {
    id: u64,
    seeds: Vec<SeedPattern>,
    threshold: f64,
    created_at: DateTime<Utc>,
    closed: bool,
    candidates: BTreeSet<String>,
}

/// State replayed from the logs.
#[derive(Clone, Debug, Default)]
pub struct State {
    rounds: BTreeMap<u64, RoundState>,
    candidates: BTreeMap<String, Candidate>,
    decisions: Vec<Decision>,
}

impl State {
    fn apply_proposal(&mut self, ev: &ProposalEvent) {
        match ev {
            ProposalEvent::Round { id, seeds, threshold, created_at } => {
                self.rounds.insert(
                    *id,
                    RoundState {
                        id: *id,
                        seeds: seeds.clone(),
                        threshold: *threshold,
                        created_at: *created_at,
                        closed: false,
                        candidates: BTreeSet::new(),
                    },
                );
            }
            ProposalEvent::Proposal { round, row } => {
                let id = row.id();
                if let Some(prev) = self.candidates.get(&id) {
                    if let Some(r) = self.rounds.get_mut(&prev.round) {
                        r.candidates.remove(&id);
                    }
                }
                if let Some(r) = self.rounds.get_mut(round) {
                    r.candidates.insert(id.clone());
                }
                let mut row = row.clone();
                row.status = RowStatus::Proposed;
                self.candidates.insert(id.clone(), Candidate { id, round: *round, row });
            }
            ProposalEvent::Close { round, .. } => {
                if let Some(r) = self.rounds.get_mut(round) {
                    r.closed = true;
                }
            }
        }
    }

    fn apply_decision(&mut self, d: &Decision) {
        if let Some(c) = self.candidates.get_mut(&d.candidate_id) {
            c.row.status = d.verdict.status();
        }
        self.decisions.push(d.clone());
    }

    fn round_view(&self, r: &RoundState) -> Round {
        let statuses = r.candidates.iter().filter_map(|id| self.candidates.get(id)).map(|c| c.row.status);
        let (mut accepted, mut rejected) = (0, 0);
        for s in statuses {
            match s {
                RowStatus::Accepted => accepted += 1,
                RowStatus::Rejected => rejected += 1,
                RowStatus::Proposed => {}
            }
        }
        Round {
            id: r.id,
            seeds: r.seeds.clone(),
            threshold: r.threshold,
            created_at: r.created_at,
            closed: r.closed,
            stats: RoundStats::compute(r.candidates.len(), accepted, rejected, r.seeds.len()),
        }
    }

    pub fn rounds(&self) -> Vec<Round> {
        self.rounds.values().map(|r| self.round_view(r)).collect()
    }

    pub fn round(&self, id: u64) -> Option<Round> {
        self.rounds.get(&id).map(|r| self.round_view(r))
    }

    /// Candidates in score order, optionally filtered.
    pub fn candidates(&self, status: Option<RowStatus>, round: Option<u64>) -> Vec<Candidate> {
        let mut out: Vec<Candidate> = self
            .candidates
            .values()
            .filter(|c| status.is_none_or(|s| c.row.status == s) && round.is_none_or(|r| c.round == r))
            .cloned()
            .collect();
        out.sort_by(|a, b| row_order(&a.row, &b.row));
        out
    }

    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.get(id)
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Every accepted row, canonical order.
    pub fn accepted_table(&self) -> PatternTable {
        let mut rows: Vec<PatternRow> =
            self.candidates.values().filter(|c| c.row.status == RowStatus::Accepted).map(|c| c.row.clone()).collect();
        rows.sort_by(row_order);
        PatternTable::from_rows(rows).expect("candidate ids are unique")
    }

    /// Status of every candidate, for replay comparisons.
    pub fn statuses(&self) -> BTreeMap<String, (u64, RowStatus)> {
        self.candidates.iter().map(|(id, c)| (id.clone(), (c.round, c.row.status))).collect()
    }
}

struct Logs {
    proposals: File,
    decisions: File,
}

pub struct Store {
    dir: PathBuf,
    resources: Option<Resources>,
    state: RwLock<State>,
    /// serializes every mutation; held across the log append and the state update
    writer: Mutex<Logs>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

/// Parses a log, dropping and cutting an unterminated final line.
fn replay<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete < bytes.len() {
        tracing::warn!(path = %path.display(), dropped = bytes.len() - complete, "dropping truncated final log line");
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(complete as u64).map_err(io_err(path))?;
        f.sync_all().map_err(io_err(path))?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| StoreError::Corrupt {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(ev);
    }
    Ok(out)
}

fn append<T: Serialize>(file: &mut File, path: &Path, events: &[T]) -> Result<(), StoreError> {
    let mut buf = String::new();
    for e in events {
        buf.push_str(&serde_json::to_string(e).expect("events serialize"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes()).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))
}

impl Store {
    /// Opens (creating if needed) the data directory and replays its logs.
    pub fn open(dir: impl Into<PathBuf>, resources: Option<Resources>) -> Result<Store, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let state = Self::load(&dir)?;
        let open = |name: &str| {
            let p = dir.join(name);
            OpenOptions::new().create(true).append(true).open(&p).map_err(io_err(&p))
        };
        let logs = Logs { proposals: open(PROPOSALS_LOG)?, decisions: open(DECISIONS_LOG)? };
        Ok(Store { dir, resources, state: RwLock::new(state), writer: Mutex::new(logs) })
    }

    /// Replays the logs of `dir` into a fresh state.
    pub fn load(dir: &Path) -> Result<State, StoreError> {
        let mut state = State::default();
        for ev in replay::<ProposalEvent>(&dir.join(PROPOSALS_LOG))? {
            state.apply_proposal(&ev);
        }
        for d in replay::<Decision>(&dir.join(DECISIONS_LOG))? {
            state.apply_decision(&d);
        }
        Ok(state)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `f` on a consistent snapshot.
    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.state.read().expect("state lock poisoned"))
    }

    pub fn start_round(&self, seeds: Vec<SeedPattern>, threshold: f64) -> Result<Round, StoreError> {
        if seeds.is_empty() {
            return Err(StoreError::Validation("seeds must not be empty".into()));
        }
        let res = self
            .resources
            .as_ref()
            .ok_or_else(|| StoreError::Unavailable("no corpus or semantic net loaded".into()))?;
        let acquirer = Acquirer::new(&res.net, &res.analyzer.lexicon, threshold)?;
        let table = acquirer.acquire_seeds(&seeds, &res.sentences);

        let mut logs = self.writer.lock().expect("writer lock poisoned");
        let (id, fresh) = self.read(|s| {
            let id = s.rounds.keys().next_back().map_or(1, |k| k + 1);
            let fresh: Vec<PatternRow> = table
                .rows()
                .iter()
                .filter(|r| match s.candidates.get(&r.id()) {
                    None => true,
                    Some(c) => c.row.status == RowStatus::Proposed && s.rounds.get(&c.round).is_some_and(|r| r.closed),
                })
                .cloned()
                .collect();
            (id, fresh)
        });
        let mut events = vec![ProposalEvent::Round { id, seeds, threshold, created_at: Utc::now() }];
        events.extend(fresh.into_iter().map(|row| ProposalEvent::Proposal { round: id, row }));
        append(&mut logs.proposals, &self.dir.join(PROPOSALS_LOG), &events)?;
        let mut state = self.state.write().expect("state lock poisoned");
        for e in &events {
            state.apply_proposal(e);
        }
        Ok(state.round(id).expect("round just applied"))
    }

    pub fn record_decision(
        &self,
        candidate_id: &str,
        verdict: Verdict,
        annotator: &str,
    ) -> Result<Candidate, StoreError> {
        if annotator.trim().is_empty() {
            return Err(StoreError::Validation("annotator must not be empty".into()));
        }
        let mut logs = self.writer.lock().expect("writer lock poisoned");
        let current = self.read(|s| {
            let c = s
                .candidates
                .get(candidate_id)
                .cloned()
                .ok_or_else(|| StoreError::NotFound(format!("unknown candidate `{candidate_id}`")))?;
            if s.rounds.get(&c.round).is_some_and(|r| r.closed) {
                return Err(StoreError::Conflict(format!("round {} is closed", c.round)));
            }
            Ok(c)
        })?;
        if current.row.status == verdict.status() {
            return Ok(current);
        }
        let d = Decision {
            candidate_id: candidate_id.to_string(),
            verdict,
            annotator: annotator.trim().to_string(),
            at: Utc::now(),
        };
        append(&mut logs.decisions, &self.dir.join(DECISIONS_LOG), std::slice::from_ref(&d))?;
        let mut state = self.state.write().expect("state lock poisoned");
        state.apply_decision(&d);
        Ok(state.candidates[candidate_id].clone())
    }

    /// Provenance sentences of a candidate with the pair marked, in
    /// (doc, sentence) order.
    pub fn concordance(&self, candidate_id: &str, k: usize) -> Result<Vec<Snippet>, StoreError> {
        let provenance = self.read(|s| {
            s.candidates
                .get(candidate_id)
                .map(|c| c.row.provenance.clone())
                .ok_or_else(|| StoreError::NotFound(format!("unknown candidate `{candidate_id}`")))
        })?;
        let Some(res) = self.resources.as_ref() else {
            return Err(StoreError::Unavailable("no corpus loaded".into()));
        };
        let mut out = Vec::new();
        for p in provenance.iter().take(k) {
            let Some(s) = res.sentence(&p.doc_id, p.sentence) else {
                continue;
            };
            let mut marked = String::new();
            for (i, t) in s.tokens.iter().enumerate() {
                if i > 0 {
                    marked.push_str(&t.pre);
                }
                if i == p.head || i == p.expansion {
                    marked.push('[');
                    marked.push_str(&t.raw);
                    marked.push(']');
                } else {
                    marked.push_str(&t.raw);
                }
            }
            out.push(Snippet {
                doc_id: p.doc_id.clone(),
                sentence: p.sentence,
                text: s.text(),
                marked,
                head: p.head,
                expansion: p.expansion,
            });
        }
        Ok(out)
    }

    /// Closes the round and exports its accepted rows plus one derived seed
    /// per row. Repeating it returns the same result.
    pub fn promote(&self, round: u64) -> Result<Promotion, StoreError> {
        let mut logs = self.writer.lock().expect("writer lock poisoned");
        let (closed, rows) = self.read(|s| {
            let r = s.rounds.get(&round).ok_or_else(|| StoreError::NotFound(format!("unknown round {round}")))?;
            let mut rows: Vec<PatternRow> = r
                .candidates
                .iter()
                .filter_map(|id| s.candidates.get(id))
                .filter(|c| c.row.status == RowStatus::Accepted)
                .map(|c| c.row.clone())
                .collect();
            rows.sort_by(row_order);
            Ok::<_, StoreError>((r.closed, rows))
        })?;
        if rows.is_empty() {
            return Err(StoreError::Validation(format!("round {round} has no accepted rows")));
        }
        if !closed {
            let ev = ProposalEvent::Close { round, at: Utc::now() };
            append(&mut logs.proposals, &self.dir.join(PROPOSALS_LOG), std::slice::from_ref(&ev))?;
            self.state.write().expect("state lock poisoned").apply_proposal(&ev);
        }
        let seeds =
            rows.iter().map(|r| SeedPattern::new(&r.elt1, &r.elt2, &r.etq, &r.objet)).collect::<Result<Vec<_>, _>>()?;
        let table = PatternTable::from_rows(rows.clone()).expect("candidate ids are unique").to_tsv();
        Ok(Promotion { round, rows, table, seeds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_seed_format() {
        assert_eq!(per_seed_display(25, 6), "4.16");
        assert_eq!(per_seed_display(5, 1), "5.00");
        assert_eq!(per_seed_display(1, 3), "0.33");
        assert_eq!(per_seed_display(0, 0), "0.00");
    }

    #[test]
    fn rates() {
        let s = RoundStats::compute(31, 25, 6, 6);
        assert!((s.acceptance_rate - 25.0 / 31.0).abs() < 1e-12);
        assert_eq!(s.new_patterns_per_seed_display, "4.16");
        assert_eq!(RoundStats::compute(0, 0, 0, 1).acceptance_rate, 0.0);
    }

    #[test]
    fn events_are_tagged() {
        let ev = ProposalEvent::Close { round: 3, at: DateTime::from_timestamp(0, 0).unwrap() };
        let s = serde_json::to_string(&ev).unwrap();
        assert!(s.starts_with(r#"{"event":"close","round":3"#), "{s}");
        assert_eq!(serde_json::from_str::<ProposalEvent>(&s).unwrap(), ev);
    }
}
