//! Corpus ingestion: lexicon lookup, tokenization, entity normalization and
//! shallow chunking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    N,
    V,
    A,
    D,
    P,
    X,
}

impl Pos {
    pub const ALL: [Pos; 6] = [Pos::N, Pos::V, Pos::A, Pos::D, Pos::P, Pos::X];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::N => "N",
            Pos::V => "V",
            Pos::A => "A",
            Pos::D => "D",
            Pos::P => "P",
            Pos::X => "X",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pos::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown part of speech `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    pub predicative: bool,
}

/// Surface → entries index with case-folded lookup. Surfaces may be
/// ambiguous; the first declared entry is the primary reading.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    by_surface: BTreeMap<String, Vec<LexiconEntry>>,
    by_lemma: BTreeMap<String, Vec<(String, Pos, bool)>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Lexicon, CorpusError> {
        let mut lex = Lexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| CorpusError::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (surface, lemma, pos, pred) = match fields.as_slice() {
                [s, l, p] => (*s, *l, *p, false),
                [s, l, p, "pred"] => (*s, *l, *p, true),
                [_, _, _, other] => return Err(err(format!("expected `pred`, got `{other}`"))),
                _ => return Err(err("expected `<surface> <lemma> <POS> [pred]`".into())),
            };
            let pos: Pos = pos.parse().map_err(err)?;
            lex.insert(LexiconEntry {
                surface: surface.to_lowercase(),
                lemma: lemma.to_string(),
                pos,
                predicative: pred,
            });
        }
        Ok(lex)
    }

    pub fn insert(&mut self, entry: LexiconEntry) {
        let entries = self.by_surface.entry(entry.surface.clone()).or_default();
        if entries.iter().any(|e| e.lemma == entry.lemma && e.pos == entry.pos) {
            return;
        }
        self.by_lemma.entry(entry.lemma.clone()).or_default().push((
            entry.surface.clone(),
            entry.pos,
            entry.predicative,
        ));
        entries.push(entry);
    }

    pub fn lookup(&self, surface: &str) -> &[LexiconEntry] {
        self.by_surface.get(&surface.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.by_lemma.contains_key(lemma)
    }

    /// Inflected surfaces of `lemma`, restricted to `pos` when given.
    pub fn surfaces_of(&self, lemma: &str, pos: Option<Pos>) -> BTreeSet<String> {
        self.by_lemma
            .get(lemma)
            .into_iter()
            .flatten()
            .filter(|(_, p, _)| pos.is_none_or(|want| *p == want))
            .map(|(s, _, _)| s.clone())
            .collect()
    }

    /// Verbs are predicates; nouns are when some entry of the lemma carries
    /// the predicative flag.
    pub fn is_predicative(&self, lemma: &str, pos: Pos) -> bool {
        match pos {
            Pos::V => true,
            Pos::N => self.by_lemma.get(lemma).is_some_and(|es| es.iter().any(|(_, p, pred)| *p == Pos::N && *pred)),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.by_surface.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_surface.is_empty()
    }
}

/// Multi-token proper names mapped to entity classes.
#[derive(Clone, Debug, Default)]
pub struct Gazetteer {
    // first token raw → (name token raws, class), longest first
    names: HashMap<String, Vec<(Vec<String>, String)>>,
}

impl Gazetteer {
    pub fn parse(text: &str) -> Result<Gazetteer, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((name, class)) = line.rsplit_once('\t') else {
                return Err(CorpusError::Parse { line: i + 1, message: "expected `<surface>\\t<class>`".into() });
            };
            let (name, class) = (name.trim(), class.trim());
            if name.is_empty() || class.is_empty() {
                return Err(CorpusError::Parse { line: i + 1, message: "empty name or class".into() });
            }
            pairs.push((name.to_string(), class.to_string()));
        }
        Ok(Gazetteer::from_pairs(pairs))
    }

    pub fn from_pairs<I, S, C>(pairs: I) -> Gazetteer
    where
        I: IntoIterator<Item = (S, C)>,
        S: AsRef<str>,
        C: Into<String>,
    {
        let mut names: HashMap<String, Vec<(Vec<String>, String)>> = HashMap::new();
        for (name, class) in pairs {
            let toks: Vec<String> = tokenize(name.as_ref()).into_iter().map(|t| t.raw).collect();
            if toks.is_empty() {
                continue;
            }
            names.entry(toks[0].clone()).or_default().push((toks, class.into()));
        }
        for list in names.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
            list.dedup_by(|a, b| a.0 == b.0);
        }
        Gazetteer { names }
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// separator text preceding the token in the source
    pub pre: String,
    /// original source text of the token
    pub raw: String,
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    /// every part of speech the lexicon allows for the surface
    pub tags: Vec<Pos>,
    pub plain: bool,
    pub entity_class: Option<String>,
    pub punct: bool,
}

impl Token {
    /// Lemma used for proximity and pattern elements: the class name for
    /// entity tokens, the lemma otherwise.
    pub fn key(&self) -> &str {
        self.entity_class.as_deref().unwrap_or(&self.lemma)
    }

    pub fn has_tag(&self, pos: Pos) -> bool {
        self.tags.contains(&pos)
    }

    pub fn is_entity(&self) -> bool {
        self.entity_class.is_some()
    }

    fn entity(pre: String, raw: String, class: &str) -> Token {
        let var = format!("*{class}*");
        Token {
            pre,
            raw,
            surface: var.clone(),
            lemma: var,
            pos: Pos::N,
            tags: vec![Pos::N],
            plain: true,
            entity_class: Some(class.to_string()),
            punct: false,
        }
    }

    fn untagged(pre: String, raw: String, punct: bool) -> Token {
        Token {
            lemma: raw.to_lowercase(),
            surface: raw.clone(),
            pre,
            raw,
            pos: Pos::X,
            tags: if punct { Vec::new() } else { vec![Pos::X] },
            plain: false,
            entity_class: None,
            punct,
        }
    }

    /// Builds a tagged token straight from the lexicon, for tests and
    /// recognizers that work on bare word sequences.
    pub fn from_lexicon(word: &str, lexicon: &Lexicon) -> Token {
        let mut toks = tokenize(word);
        let mut t = if toks.len() == 1 { toks.remove(0) } else { Token::untagged(String::new(), word.into(), false) };
        t.pre.clear();
        tag(&mut t, lexicon);
        t.plain = !t.punct && !matches!(t.pos, Pos::D | Pos::P);
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChunkKind {
    NP,
    VP,
}

/// Half-open token span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub kind: ChunkKind,
}

impl Chunk {
    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub tokens: Vec<Token>,
    pub chunks: Vec<Chunk>,
    /// separator text after the last token (only non-empty at document end)
    pub trailing: String,
}

impl Sentence {
    pub fn plain_words(&self) -> impl Iterator<Item = (usize, &Token)> {
        self.tokens.iter().enumerate().filter(|(_, t)| t.plain)
    }

    pub fn chunk_of(&self, i: usize) -> Option<&Chunk> {
        self.chunks.iter().find(|c| c.contains(i))
    }

    /// Source text of the sentence, without its leading separator.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push_str(&t.pre);
            }
            out.push_str(&t.raw);
        }
        out
    }
}

const ELISIONS: &[&str] = &["l", "d", "qu", "j", "m", "n", "s", "t", "c", "jusqu", "lorsqu", "puisqu"];
const TERMINALS: &[&str] = &[".", "!", "?", "…"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

/// Splits text into untagged tokens. Every byte of the input ends up in some
/// token's `pre` or `raw`, except trailing whitespace.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut i = 0;
    let mut pre_start = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let pre = text[byte_at(pre_start)..byte_at(i)].to_string();
        let start = i;
        if c == '*' {
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j].1) {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && chars[j].1 == '*' {
                let raw = &text[byte_at(i)..byte_at(j + 1)];
                out.push(Token::entity(pre, raw.to_string(), &raw[1..raw.len() - 1]));
                i = j + 1;
                pre_start = i;
                continue;
            }
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let d = chars[j].1;
                if is_word_char(d) || (is_apostrophe(d) && chars.get(j + 1).is_some_and(|n| n.1.is_alphanumeric())) {
                    j += 1;
                } else {
                    break;
                }
            }
            // French elision: l'ensemble → l' + ensemble
            let word_end = j;
            let mut split_at = None;
            if let Some(k) = (start..word_end).find(|&k| is_apostrophe(chars[k].1)) {
                let prefix = text[byte_at(start)..byte_at(k)].to_lowercase();
                if ELISIONS.contains(&prefix.as_str()) {
                    split_at = Some(k + 1);
                }
            }
            match split_at {
                Some(k) => {
                    out.push(Token::untagged(pre, text[byte_at(start)..byte_at(k)].to_string(), false));
                    i = k;
                }
                None => {
                    out.push(Token::untagged(pre, text[byte_at(start)..byte_at(word_end)].to_string(), false));
                    i = word_end;
                }
            }
            pre_start = i;
            continue;
        }
        out.push(Token::untagged(pre, c.to_string(), true));
        i += 1;
        pre_start = i;
    }
    out
}

/// Replaces gazetteer names by a single entity token, longest match first.
pub fn normalize_entities(tokens: Vec<Token>, gazetteer: &Gazetteer) -> Vec<Token> {
    if gazetteer.is_empty() {
        return tokens;
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let hit = gazetteer.names.get(&tokens[i].raw).and_then(|cands| {
            cands.iter().find(|(name, _)| {
                i + name.len() <= tokens.len()
                    && name.iter().zip(&tokens[i..]).all(|(n, t)| *n == t.raw && !t.is_entity())
            })
        });
        match hit {
            Some((name, class)) => {
                let mut raw = tokens[i].raw.clone();
                for t in &tokens[i + 1..i + name.len()] {
                    raw.push_str(&t.pre);
                    raw.push_str(&t.raw);
                }
                out.push(Token::entity(tokens[i].pre.clone(), raw, class));
                i += name.len();
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

fn tag(t: &mut Token, lexicon: &Lexicon) {
    if t.is_entity() || t.punct {
        return;
    }
    let entries = lexicon.lookup(&t.raw);
    match entries.first() {
        Some(first) => {
            t.lemma = first.lemma.clone();
            t.pos = first.pos;
            t.tags.clear();
            for e in entries {
                if !t.tags.contains(&e.pos) {
                    t.tags.push(e.pos);
                }
            }
        }
        None => {
            t.lemma = t.raw.to_lowercase();
            t.pos = Pos::X;
            t.tags = vec![Pos::X];
        }
    }
}

/// Length of the longest noun phrase starting at `start`, 0 when none.
/// Shape: `D? (A|N)* N (P D? (A|N)* N)*`, matched against each token's tag set.
pub fn noun_phrase_len(tokens: &[Token], start: usize) -> usize {
    // states: 0 = start, 1 = inside a noun group, 2 = after head noun (accepting),
    // 3 = after a linking preposition
    const START: u8 = 1 << 0;
    const GROUP: u8 = 1 << 1;
    const HEAD: u8 = 1 << 2;
    const LINK: u8 = 1 << 3;
    let closure = |s: u8| {
        let mut s = s;
        if s & (START | LINK) != 0 {
            s |= GROUP;
        }
        s
    };
    let mut states = closure(START);
    let mut best = 0;
    for (k, t) in tokens.iter().enumerate().skip(start) {
        let mut next = 0u8;
        if states & (START | LINK) != 0 && t.has_tag(Pos::D) {
            next |= GROUP;
        }
        if states & GROUP != 0 {
            if t.has_tag(Pos::A) || t.has_tag(Pos::N) {
                next |= GROUP;
            }
            if t.has_tag(Pos::N) {
                next |= HEAD;
            }
        }
        if states & HEAD != 0 && t.has_tag(Pos::P) {
            next |= LINK;
        }
        states = closure(next);
        if states == 0 {
            break;
        }
        if states & HEAD != 0 {
            best = k + 1 - start;
        }
    }
    best
}

/// Verb cluster `V (P? X? V)*`: auxiliaries, participles and infinitival
/// complements such as "décidé de renoncer à se porter".
fn verb_cluster_len(tokens: &[Token], start: usize) -> usize {
    let is_verb = |i: usize| tokens.get(i).is_some_and(|t| t.pos == Pos::V);
    if !is_verb(start) {
        return 0;
    }
    let mut end = start + 1;
    loop {
        let mut j = end;
        if tokens.get(j).is_some_and(|t| t.has_tag(Pos::P)) {
            j += 1;
        }
        if tokens.get(j).is_some_and(|t| t.pos == Pos::X && !t.punct && !t.is_entity()) {
            j += 1;
        }
        if is_verb(j) {
            end = j + 1;
        } else {
            return end - start;
        }
    }
}

/// Non-overlapping chunks: a verb cluster followed by its object noun phrase
/// forms one VP; other maximal noun phrases are NPs.
pub fn chunk(tokens: &[Token]) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let vc = verb_cluster_len(tokens, i);
        if vc > 0 {
            let np = noun_phrase_len(tokens, i + vc);
            out.push(Chunk { start: i, end: i + vc + np, kind: ChunkKind::VP });
            i += vc + np;
            continue;
        }
        let np = noun_phrase_len(tokens, i);
        if np > 0 {
            out.push(Chunk { start: i, end: i + np, kind: ChunkKind::NP });
            i += np;
        } else {
            i += 1;
        }
    }
    out
}

/// Immutable analysis resources shared by acquisition and extraction.
#[derive(Clone, Debug, Default)]
pub struct Analyzer {
    pub lexicon: Lexicon,
    pub gazetteer: Gazetteer,
    pub stopwords: BTreeSet<String>,
}

impl Analyzer {
    pub fn new(lexicon: Lexicon, gazetteer: Gazetteer, stopwords: BTreeSet<String>) -> Self {
        Analyzer { lexicon, gazetteer, stopwords }
    }

    fn finish_token(&self, t: &mut Token) {
        tag(t, &self.lexicon);
        t.plain = if t.is_entity() {
            true
        } else {
            !t.punct && !matches!(t.pos, Pos::D | Pos::P) && !self.stopwords.contains(&t.raw.to_lowercase())
        };
    }

    /// Tokenizes, normalizes entities, splits sentences, tags and chunks.
    pub fn analyze(&self, doc_id: &str, text: &str) -> Vec<Sentence> {
        let mut tokens = normalize_entities(tokenize(text), &self.gazetteer);
        for t in &mut tokens {
            self.finish_token(t);
        }
        let consumed: usize = tokens.iter().map(|t| t.pre.len() + t.raw.len()).sum();
        let trailing = text[consumed..].to_string();

        let is_terminal = |t: &Token| t.punct && TERMINALS.contains(&t.raw.as_str());
        let mut sentences: Vec<Sentence> = Vec::new();
        let mut current: Vec<Token> = Vec::new();
        let mut iter = tokens.into_iter().peekable();
        while let Some(t) = iter.next() {
            let ends = is_terminal(&t) && !iter.peek().is_some_and(is_terminal);
            current.push(t);
            if ends || iter.peek().is_none() {
                let tokens = std::mem::take(&mut current);
                let chunks = chunk(&tokens);
                sentences.push(Sentence {
                    doc_id: doc_id.to_string(),
                    index: sentences.len(),
                    tokens,
                    chunks,
                    trailing: String::new(),
                });
            }
        }
        if let Some(last) = sentences.last_mut() {
            last.trailing = trailing;
        }
        sentences
    }

    pub fn analyze_corpus(&self, docs: &[(String, String)]) -> Vec<Sentence> {
        docs.iter().flat_map(|(id, text)| self.analyze(id, text)).collect()
    }
}

/// Concatenates separators and raw token text back into the source.
pub fn reconstruct(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for t in &s.tokens {
            out.push_str(&t.pre);
            out.push_str(&t.raw);
        }
        out.push_str(&s.trailing);
    }
    out
}

/// Reads every regular file of a directory as one document; the document id
/// is the file stem. Sorted by id.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let io_err = |path: &Path, source| CorpusError::Io { path: path.display().to_string(), source };
    let mut docs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        docs.push((id, text));
    }
    docs.sort();
    Ok(docs)
}
