//! Syntactic-variation meta-graphs.
//!
//! A meta-graph is a small automaton template over token predicates with two
//! abstract slots, `@ELT1` and `@ELT2`, and a guard over pattern-table
//! columns. Instantiating it against an accepted row replaces the slots by
//! the inflected surfaces of the row's elements. The union of every
//! instantiation is determinized over predicate labels into one
//! [`CompiledGraph`] that remembers which rows each accepting state came
//! from and which transition captures the slot filler.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{noun_phrase_len, Lexicon, Pos, Token};
use crate::table::{PatternRow, PatternTable, RowStatus, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum MetaGraphError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown guard column `{column}`")]
    UnknownColumn { line: usize, column: String },
    #[error("graph `{graph}`: {message}")]
    Invalid { graph: String, message: String },
    #[error("lemma `{0}` is not in the lexicon")]
    UnknownLemma(String),
    #[error("pattern table has no accepted rows")]
    NoAcceptedRows,
    #[error("compiled graph line {line}: {message}")]
    GraphFile { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    SubjectVerb,
    VerbDobj,
    VerbIobj,
    NounPoss,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::SubjectVerb => "subject-verb",
            Structure::VerbDobj => "verb-dobj",
            Structure::VerbIobj => "verb-iobj",
            Structure::NounPoss => "noun-poss",
        }
    }
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subject-verb" => Ok(Structure::SubjectVerb),
            "verb-dobj" => Ok(Structure::VerbDobj),
            "verb-iobj" => Ok(Structure::VerbIobj),
            "noun-poss" => Ok(Structure::NounPoss),
            _ => Err(format!("unknown structure `{s}`")),
        }
    }
}

/// Pattern-table columns a guard may test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    Schema,
    Elt1,
    Cat1,
    Elt2,
    Cat2,
    Etq,
    Objet,
}

impl Column {
    fn parse(s: &str) -> Option<Column> {
        Some(match s {
            "SCHEMA" | "@A" => Column::Schema,
            "ELT1" => Column::Elt1,
            "CAT1" => Column::Cat1,
            "ELT2" => Column::Elt2,
            "CAT2" => Column::Cat2,
            "ETQ" => Column::Etq,
            "OBJET" => Column::Objet,
            _ => return None,
        })
    }

    fn value(self, row: &PatternRow) -> String {
        match self {
            Column::Schema => row.schema.to_string(),
            Column::Elt1 => row.elt1.clone(),
            Column::Cat1 => row.cat1.to_string(),
            Column::Elt2 => row.elt2.clone(),
            Column::Cat2 => row.cat2.to_string(),
            Column::Etq => row.etq.clone(),
            Column::Objet => row.objet.clone(),
        }
    }
}

/// Conjunction of column equality tests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Guard {
    pub tests: Vec<(Column, String)>,
}

impl Guard {
    pub fn accepts(&self, row: &PatternRow) -> bool {
        self.tests.iter().all(|(col, want)| col.value(row) == *want)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Elt1,
    Elt2,
}

/// Template transition predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    Literal(String),
    Slot(Element),
    Pos(Pos),
    /// zero or more modifiers; only valid as a self-loop
    Modifier,
    /// a single entity token or a whole noun phrase
    Arg,
}

impl Predicate {
    fn parse(s: &str) -> Result<Predicate, String> {
        Ok(match s {
            "@ELT1" => Predicate::Slot(Element::Elt1),
            "@ELT2" => Predicate::Slot(Element::Elt2),
            "<MOD>" => Predicate::Modifier,
            "<ARG>" => Predicate::Arg,
            _ if s.starts_with('<') && s.ends_with('>') && s.len() > 2 => Predicate::Pos(s[1..s.len() - 1].parse()?),
            _ if s.starts_with('@') => return Err(format!("unknown slot `{s}`")),
            _ if s.is_empty() => return Err("empty predicate".into()),
            _ => Predicate::Literal(s.to_lowercase()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateEdge {
    pub from: usize,
    pub to: usize,
    pub predicate: Predicate,
    pub capture: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaGraph {
    pub id: String,
    pub structure: Structure,
    pub guard: Guard,
    pub state_names: Vec<String>,
    pub start: usize,
    pub accepting: BTreeSet<usize>,
    pub edges: Vec<TemplateEdge>,
}

struct Builder {
    id: String,
    line: usize,
    structure: Structure,
    guard: Guard,
    state_names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<TemplateEdge>,
    accepting: BTreeSet<usize>,
    captures: Vec<(usize, usize, usize, String)>,
}

impl Builder {
    fn state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.state_names.push(name.to_string());
        self.index.insert(name.to_string(), self.state_names.len() - 1);
        self.state_names.len() - 1
    }

    fn finish(mut self) -> Result<MetaGraph, MetaGraphError> {
        let invalid = |message: String| MetaGraphError::Invalid { graph: self.id.clone(), message };
        if self.edges.is_empty() {
            return Err(invalid("no transitions".into()));
        }
        if self.accepting.is_empty() {
            return Err(invalid("no accepting state".into()));
        }
        for (line, from, to, name) in std::mem::take(&mut self.captures) {
            let mut hit = false;
            for e in self.edges.iter_mut().filter(|e| e.from == from && e.to == to) {
                hit = true;
                e.capture = Some(name.clone());
            }
            if !hit {
                return Err(MetaGraphError::Syntax {
                    line,
                    message: format!(
                        "capture on missing transition {}->{}",
                        self.state_names[from], self.state_names[to]
                    ),
                });
            }
        }
        let g = MetaGraph {
            start: 0,
            id: self.id,
            structure: self.structure,
            guard: self.guard,
            state_names: self.state_names,
            accepting: self.accepting,
            edges: self.edges,
        };
        g.validate()?;
        Ok(g)
    }
}

impl MetaGraph {
    fn validate(&self) -> Result<(), MetaGraphError> {
        let invalid = |message: String| MetaGraphError::Invalid { graph: self.id.clone(), message };
        if self.accepting.contains(&self.start) {
            return Err(invalid("start state may not be accepting".into()));
        }
        for e in &self.edges {
            if e.predicate == Predicate::Modifier && e.from != e.to {
                return Err(invalid("<MOD> must label a self-loop".into()));
            }
        }
        // capture counts reachable at each state, saturating at 2
        let n = self.state_names.len();
        let mut counts = vec![0u8; n]; // bit k set = count k reachable
        counts[self.start] = 1;
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.edges {
                let src = counts[e.from];
                if src == 0 {
                    continue;
                }
                let shifted = if e.capture.is_some() {
                    let mut s = (src << 1) & 0b111;
                    if src & 0b110 != 0 {
                        s |= 0b100;
                    }
                    s
                } else {
                    src
                };
                if counts[e.to] | shifted != counts[e.to] {
                    counts[e.to] |= shifted;
                    changed = true;
                }
            }
        }
        for &a in &self.accepting {
            match counts[a] {
                0 => return Err(invalid(format!("accepting state {} is unreachable", self.state_names[a]))),
                0b010 => {}
                _ => {
                    return Err(invalid(format!(
                        "paths to accepting state {} must carry exactly one capture",
                        self.state_names[a]
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Parses a meta-graph file.
pub fn parse_metagraphs(text: &str) -> Result<Vec<MetaGraph>, MetaGraphError> {
    let mut out = Vec::new();
    let mut current: Option<Builder> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        // '#' is never a token, but keep "#" usable inside a literal by
        // requiring it to start a word
        let content = if raw.trim_start().starts_with('#') { "" } else { content };
        if content.is_empty() {
            continue;
        }
        let syntax = |message: String| MetaGraphError::Syntax { line, message };
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "graph" => {
                if let Some(b) = current.take() {
                    out.push(b.finish()?);
                }
                let (id, structure, guard) = match words.as_slice() {
                    ["graph", id, "structure", s] => (*id, *s, None),
                    ["graph", id, "structure", s, "guard", g] => (*id, *s, Some(*g)),
                    _ => return Err(syntax("expected `graph <id> structure <kind> [guard <col>=<val>,...]`".into())),
                };
                if out.iter().any(|g: &MetaGraph| g.id == id) {
                    return Err(syntax(format!("duplicate graph id `{id}`")));
                }
                let structure: Structure = structure.parse().map_err(syntax)?;
                let mut tests = Vec::new();
                if let Some(g) = guard.filter(|g| *g != "-") {
                    for test in g.split(',') {
                        let (col, val) =
                            test.split_once('=').ok_or_else(|| syntax(format!("guard test `{test}` lacks `=`")))?;
                        let column = Column::parse(col)
                            .ok_or_else(|| MetaGraphError::UnknownColumn { line, column: col.to_string() })?;
                        match column {
                            Column::Schema => {
                                val.parse::<Schema>().map_err(syntax)?;
                            }
                            Column::Cat1 | Column::Cat2 => {
                                val.parse::<Pos>().map_err(syntax)?;
                            }
                            _ => {}
                        }
                        tests.push((column, val.to_string()));
                    }
                }
                current = Some(Builder {
                    id: id.to_string(),
                    line,
                    structure,
                    guard: Guard { tests },
                    state_names: Vec::new(),
                    index: HashMap::new(),
                    edges: Vec::new(),
                    accepting: BTreeSet::new(),
                    captures: Vec::new(),
                });
            }
            kw => {
                let b = current.as_mut().ok_or_else(|| syntax("statement outside a graph block".into()))?;
                b.line = line;
                match kw {
                    "accept" => {
                        let [_, s] = words.as_slice() else {
                            return Err(syntax("expected `accept <state>`".into()));
                        };
                        let s = b.state(s);
                        b.accepting.insert(s);
                    }
                    "capture" => {
                        let rest = words.get(3..).map(|w| w.concat()).unwrap_or_default();
                        let (name, on) = (words.get(1), words.get(2));
                        let (Some(name), Some(&"on")) = (name, on) else {
                            return Err(syntax("expected `capture <objet> on <state>-><state>`".into()));
                        };
                        let (from, to) = rest
                            .split_once("->")
                            .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                            .ok_or_else(|| syntax("expected `capture <objet> on <state>-><state>`".into()))?;
                        let (from, to) = (b.state(from), b.state(to));
                        b.captures.push((line, from, to, name.to_string()));
                    }
                    _ => {
                        let (lhs, pred) = content
                            .split_once(" : ")
                            .or_else(|| content.split_once(':'))
                            .ok_or_else(|| syntax("expected `<state> -> <state> : <predicate>`".into()))?;
                        let (from, to) = lhs
                            .split_once("->")
                            .map(|(a, b)| (a.trim(), b.trim()))
                            .filter(|(a, b)| !a.is_empty() && !b.is_empty() && !a.contains(' ') && !b.contains(' '))
                            .ok_or_else(|| syntax("expected `<state> -> <state> : <predicate>`".into()))?;
                        let pred = pred.trim();
                        if pred.is_empty() || pred.contains(char::is_whitespace) {
                            return Err(syntax(format!("invalid predicate `{pred}`")));
                        }
                        let (from, to) = (b.state(from), b.state(to));
                        for alt in pred.split('|') {
                            let predicate = Predicate::parse(alt).map_err(syntax)?;
                            b.edges.push(TemplateEdge { from, to, predicate, capture: None });
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = current.take() {
        out.push(b.finish()?);
    }
    Ok(out)
}

/// Concrete transition label. The derived order (literal, slot, part of
/// speech, modifier, argument; then capture) fixes the numbering of
/// compiled states.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    Literal(String),
    Slot(Element, String),
    Pos(Pos),
    Modifier,
    Arg,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub kind: LabelKind,
    pub capture: Option<String>,
}

impl Label {
    /// Number of tokens consumed at `pos`, if the label matches there.
    pub fn consume(&self, tokens: &[Token], pos: usize) -> Option<usize> {
        let t = tokens.get(pos)?;
        let word_eq = |w: &str| t.surface.to_lowercase() == w;
        let ok = match &self.kind {
            LabelKind::Literal(w) | LabelKind::Slot(_, w) => word_eq(w),
            LabelKind::Pos(p) => t.has_tag(*p),
            LabelKind::Modifier => t.has_tag(Pos::A),
            LabelKind::Arg => {
                if t.is_entity() {
                    return Some(1);
                }
                let n = noun_phrase_len(tokens, pos);
                return (n > 0).then_some(n);
            }
        };
        ok.then_some(1)
    }

    fn encode(&self) -> String {
        let kind = match &self.kind {
            LabelKind::Literal(w) => format!("lit:{w}"),
            LabelKind::Slot(Element::Elt1, w) => format!("slot1:{w}"),
            LabelKind::Slot(Element::Elt2, w) => format!("slot2:{w}"),
            LabelKind::Pos(p) => format!("pos:{p}"),
            LabelKind::Modifier => "mod".to_string(),
            LabelKind::Arg => "arg".to_string(),
        };
        match &self.capture {
            Some(c) => format!("{kind}\tcap={c}"),
            None => kind,
        }
    }

    fn decode(kind: &str, capture: Option<&str>) -> Result<Label, String> {
        let kind = match kind.split_once(':') {
            Some(("lit", w)) if !w.is_empty() => LabelKind::Literal(w.to_string()),
            Some(("slot1", w)) if !w.is_empty() => LabelKind::Slot(Element::Elt1, w.to_string()),
            Some(("slot2", w)) if !w.is_empty() => LabelKind::Slot(Element::Elt2, w.to_string()),
            Some(("pos", p)) => LabelKind::Pos(p.parse()?),
            None if kind == "mod" => LabelKind::Modifier,
            None if kind == "arg" => LabelKind::Arg,
            _ => return Err(format!("invalid label `{kind}`")),
        };
        let capture = match capture {
            None => None,
            Some(c) => Some(
                c.strip_prefix("cap=")
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| format!("invalid capture field `{c}`"))?
                    .to_string(),
            ),
        };
        Ok(Label { kind, capture })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode().replace('\t', " "))
    }
}

/// One meta-graph instantiated against one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Instantiated {
    pub meta_id: String,
    pub row: PatternRow,
    pub states: usize,
    pub start: usize,
    pub accepting: BTreeSet<usize>,
    pub edges: Vec<(usize, Label, usize)>,
}

/// `None` when the guard rejects the row.
pub fn instantiate(
    meta: &MetaGraph,
    row: &PatternRow,
    lexicon: &Lexicon,
) -> Result<Option<Instantiated>, MetaGraphError> {
    if !meta.guard.accepts(row) {
        return Ok(None);
    }
    let surfaces = |lemma: &str, pos: Pos| {
        let mut s = lexicon.surfaces_of(lemma, Some(pos));
        if s.is_empty() {
            s = lexicon.surfaces_of(lemma, None);
        }
        if s.is_empty() {
            Err(MetaGraphError::UnknownLemma(lemma.to_string()))
        } else {
            Ok(s)
        }
    };
    let uses = |el: Element| meta.edges.iter().any(|e| e.predicate == Predicate::Slot(el));
    let elt1 = if uses(Element::Elt1) { surfaces(&row.elt1, row.cat1)? } else { BTreeSet::new() };
    let elt2 = if uses(Element::Elt2) { surfaces(&row.elt2, row.cat2)? } else { BTreeSet::new() };

    let mut edges = Vec::new();
    for e in &meta.edges {
        let capture = e.capture.as_ref().map(|c| if c == "@OBJET" { row.objet.clone() } else { c.clone() });
        let mut push = |kind: LabelKind| edges.push((e.from, Label { kind, capture: capture.clone() }, e.to));
        match &e.predicate {
            Predicate::Literal(w) => push(LabelKind::Literal(w.clone())),
            Predicate::Slot(el) => {
                let set = if *el == Element::Elt1 { &elt1 } else { &elt2 };
                for s in set {
                    push(LabelKind::Slot(*el, s.clone()));
                }
            }
            Predicate::Pos(p) => push(LabelKind::Pos(*p)),
            Predicate::Modifier => push(LabelKind::Modifier),
            Predicate::Arg => push(LabelKind::Arg),
        }
    }
    edges.sort();
    edges.dedup();
    Ok(Some(Instantiated {
        meta_id: meta.id.clone(),
        row: row.clone(),
        states: meta.state_names.len(),
        start: meta.start,
        accepting: meta.accepting.clone(),
        edges,
    }))
}

/// Which meta-graph and row an accepting state stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Origin {
    pub meta_id: String,
    pub row_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transition {
    pub from: usize,
    pub label: Label,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledGraph {
    states: usize,
    transitions: Vec<Transition>,
    accepting: BTreeMap<usize, Vec<Origin>>,
    rows: BTreeMap<String, PatternRow>,
    out: Vec<Vec<usize>>,
}

/// A successful match of the compiled graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub start: usize,
    pub end: usize,
    pub capture: (usize, usize),
    pub capture_name: String,
    pub head: Option<usize>,
    pub expansion: Option<usize>,
    pub origins: Vec<Origin>,
}

pub const GRAPH_MAGIC: &str = "parafact-graph\t1";

impl CompiledGraph {
    fn new(
        states: usize,
        mut transitions: Vec<Transition>,
        accepting: BTreeMap<usize, Vec<Origin>>,
        rows: BTreeMap<String, PatternRow>,
    ) -> Self {
        transitions.sort();
        let mut out = vec![Vec::new(); states];
        for (i, t) in transitions.iter().enumerate() {
            out[t.from].push(i);
        }
        CompiledGraph { states, transitions, accepting, rows, out }
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn accepting(&self) -> &BTreeMap<usize, Vec<Origin>> {
        &self.accepting
    }

    pub fn rows(&self) -> &BTreeMap<String, PatternRow> {
        &self.rows
    }

    /// (state count, transition count)
    pub fn stats(&self) -> (usize, usize) {
        (self.states, self.transitions.len())
    }

    /// Longest match starting at `start`; ties go to the path whose labels
    /// sort first.
    pub fn match_at(&self, tokens: &[Token], start: usize) -> Option<Match> {
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        struct Config {
            state: usize,
            pos: usize,
            capture: Option<(usize, usize, usize)>, // (start, end, transition)
            head: Option<usize>,
            expansion: Option<usize>,
        }
        let mut best: Option<Config> = None;
        let mut seen = HashSet::new();
        let mut stack = vec![Config { state: 0, pos: start, capture: None, head: None, expansion: None }];
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if c.pos > start && self.accepting.contains_key(&c.state) && c.capture.is_some() {
                match best {
                    Some(b) if b.pos >= c.pos => {}
                    _ => best = Some(c),
                }
            }
            // push in reverse so the first label is explored first
            for &ti in self.out[c.state].iter().rev() {
                let t = &self.transitions[ti];
                let Some(len) = t.label.consume(tokens, c.pos) else {
                    continue;
                };
                let mut next = Config { state: t.to, pos: c.pos + len, ..c };
                if t.label.capture.is_some() {
                    next.capture = Some((c.pos, c.pos + len, ti));
                }
                if let LabelKind::Slot(el, _) = t.label.kind {
                    match el {
                        Element::Elt1 => next.head = Some(c.pos),
                        Element::Elt2 => next.expansion = Some(c.pos),
                    }
                }
                stack.push(next);
            }
        }
        best.map(|b| {
            let (cs, ce, ti) = b.capture.expect("accepting configurations carry a capture");
            Match {
                start,
                end: b.pos,
                capture: (cs, ce),
                capture_name: self.transitions[ti].label.capture.clone().unwrap_or_default(),
                head: b.head,
                expansion: b.expansion,
                origins: self.accepting[&b.state].clone(),
            }
        })
    }

    /// Whether some accepting path consumes exactly `tokens`.
    pub fn accepts(&self, tokens: &[Token]) -> bool {
        !tokens.is_empty() && self.match_at(tokens, 0).is_some_and(|m| m.end == tokens.len())
    }

    /// Text dump with sorted rows, states and transitions.
    pub fn serialize(&self) -> String {
        let mut out = format!("{GRAPH_MAGIC}\nstates\t{}\n", self.states);
        for (id, row) in &self.rows {
            out.push_str(&format!("row\t{id}\t{}\n", row.to_tsv()));
        }
        for (state, origins) in &self.accepting {
            out.push_str(&format!("accept\t{state}"));
            for o in origins {
                out.push_str(&format!("\t{}:{}", o.meta_id, o.row_id));
            }
            out.push('\n');
        }
        for t in &self.transitions {
            out.push_str(&format!("trans\t{}\t{}\t{}\n", t.from, t.to, t.label.encode()));
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<CompiledGraph, MetaGraphError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, message: &str| MetaGraphError::GraphFile { line, message: message.to_string() };
        match lines.next() {
            Some((_, l)) if l == GRAPH_MAGIC => {}
            _ => return Err(err(1, "not a compiled graph (bad magic line)")),
        }
        let states: usize = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("states\t")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n > 0)
                .ok_or_else(|| err(2, "expected `states <n>`"))?,
            None => return Err(err(2, "missing state count")),
        };
        let mut rows = BTreeMap::new();
        let mut accepting = BTreeMap::new();
        let mut transitions = Vec::new();
        for (i, l) in lines {
            let line = i + 1;
            if l.is_empty() {
                continue;
            }
            let (kind, rest) = l.split_once('\t').ok_or_else(|| err(line, "malformed record"))?;
            match kind {
                "row" => {
                    let (id, tsv) = rest.split_once('\t').ok_or_else(|| err(line, "malformed row"))?;
                    let row = PatternRow::from_tsv(tsv).map_err(|m| err(line, &m))?;
                    if row.id() != id {
                        return Err(err(line, "row id does not match row key"));
                    }
                    rows.insert(id.to_string(), row);
                }
                "accept" => {
                    let mut f = rest.split('\t');
                    let state: usize = f
                        .next()
                        .and_then(|s| s.parse().ok())
                        .filter(|&s| s < states)
                        .ok_or_else(|| err(line, "invalid accepting state"))?;
                    let mut origins = Vec::new();
                    for o in f {
                        let (meta_id, row_id) = o.split_once(':').ok_or_else(|| err(line, "invalid origin"))?;
                        if !rows.contains_key(row_id) {
                            return Err(err(line, "origin references unknown row"));
                        }
                        origins.push(Origin { meta_id: meta_id.to_string(), row_id: row_id.to_string() });
                    }
                    if origins.is_empty() {
                        return Err(err(line, "accepting state without origin"));
                    }
                    accepting.insert(state, origins);
                }
                "trans" => {
                    let f: Vec<&str> = rest.split('\t').collect();
                    let (from, to, label, cap) = match f.as_slice() {
                        [a, b, l] => (a, b, l, None),
                        [a, b, l, c] => (a, b, l, Some(*c)),
                        _ => return Err(err(line, "malformed transition")),
                    };
                    let parse_state = |s: &str| s.parse::<usize>().ok().filter(|&s| s < states);
                    let (Some(from), Some(to)) = (parse_state(from), parse_state(to)) else {
                        return Err(err(line, "transition state out of range"));
                    };
                    let label = Label::decode(label, cap).map_err(|m| err(line, &m))?;
                    transitions.push(Transition { from, label, to });
                }
                _ => return Err(err(line, "unknown record")),
            }
        }
        // every state but the start is entered by some transition
        let mut entered = vec![false; transitions.len() + 1];
        entered[0] = true;
        for t in &transitions {
            match entered.get_mut(t.to) {
                Some(e) => *e = true,
                None => return Err(err(2, "more states declared than transitions allow")),
            }
        }
        if states > entered.len() || entered[..states].contains(&false) {
            return Err(err(2, "state count does not match transitions"));
        }
        Ok(CompiledGraph::new(states, transitions, accepting, rows))
    }
}

/// Unions every instantiation of `metas` over the accepted rows of `table`
/// and determinizes over labels. State 0 is the start state; states are
/// numbered in breadth-first discovery order with labels in sorted order.
pub fn compile(metas: &[MetaGraph], table: &PatternTable, lexicon: &Lexicon) -> Result<CompiledGraph, MetaGraphError> {
    let accepted: Vec<&PatternRow> = table.rows().iter().filter(|r| r.status == RowStatus::Accepted).collect();
    if accepted.is_empty() {
        return Err(MetaGraphError::NoAcceptedRows);
    }
    let mut insts = Vec::new();
    for row in &accepted {
        for meta in metas {
            if let Some(i) = instantiate(meta, row, lexicon)? {
                insts.push(i);
            }
        }
    }
    Ok(determinize(&insts))
}

/// Subset construction over the union of instantiated automata.
pub fn determinize(insts: &[Instantiated]) -> CompiledGraph {
    type Subset = BTreeSet<(usize, usize)>;
    let adjacency: Vec<Vec<Vec<(Label, usize)>>> = insts
        .iter()
        .map(|inst| {
            let mut adj = vec![Vec::new(); inst.states];
            for (from, label, to) in &inst.edges {
                adj[*from].push((label.clone(), *to));
            }
            adj
        })
        .collect();

    let start: Subset = insts.iter().enumerate().map(|(k, inst)| (k, inst.start)).collect();
    let mut ids: BTreeMap<Subset, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    ids.insert(start.clone(), 0);
    queue.push_back(start);
    let mut transitions = Vec::new();
    let mut accepting = BTreeMap::new();

    while let Some(subset) = queue.pop_front() {
        let id = ids[&subset];
        let origins: BTreeSet<Origin> = subset
            .iter()
            .filter(|(k, s)| insts[*k].accepting.contains(s))
            .map(|(k, _)| Origin { meta_id: insts[*k].meta_id.clone(), row_id: insts[*k].row.id() })
            .collect();
        if !origins.is_empty() {
            accepting.insert(id, origins.into_iter().collect::<Vec<_>>());
        }
        let mut moves: BTreeMap<&Label, Subset> = BTreeMap::new();
        for &(k, s) in &subset {
            for (label, to) in &adjacency[k][s] {
                moves.entry(label).or_default().insert((k, *to));
            }
        }
        for (label, target) in moves {
            let next = ids.len();
            let to = *ids.entry(target.clone()).or_insert_with(|| {
                queue.push_back(target);
                next
            });
            transitions.push(Transition { from: id, label: label.clone(), to });
        }
    }

    let rows = insts.iter().map(|i| (i.row.id(), i.row.clone())).collect();
    CompiledGraph::new(ids.len(), transitions, accepting, rows)
}
