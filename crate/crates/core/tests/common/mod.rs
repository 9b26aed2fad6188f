//! Independent oracles and generators shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use parafact::corpus::{parse_stopwords, Analyzer, Gazetteer, Lexicon, Pos, Sentence, Token};
use parafact::metagraph::{Instantiated, LabelKind};
use parafact::{SeedPattern, SemanticNet};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_net() -> SemanticNet {
    SemanticNet::parse(&fixture("acq-net.txt")).unwrap()
}

pub fn fixture_lexicon() -> Lexicon {
    Lexicon::parse(&fixture("lexicon.tsv")).unwrap()
}

pub fn fixture_analyzer() -> Analyzer {
    Analyzer::new(
        fixture_lexicon(),
        Gazetteer::parse(&fixture("gazetteer.tsv")).unwrap(),
        parse_stopwords(&fixture("stopwords.txt")),
    )
}

/// Every surface form listed in the fixture lexicon.
pub fn fixture_vocabulary() -> Vec<String> {
    let mut v: BTreeSet<String> = fixture("lexicon.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| l.split_whitespace().next().map(str::to_string))
        .collect();
    v.insert("*c-company*".into());
    v.into_iter().collect()
}

pub fn seed() -> SeedPattern {
    "cession/société/entreprise_achetee/$2".parse().unwrap()
}

// ---------------------------------------------------------------- nets

pub const KINDS: [(&str, f64); 3] = [("hypernym", 1.0), ("meronym", 1.5), ("association", 2.0)];

#[derive(Clone, Debug)]
pub struct RandomNet {
    pub text: String,
    pub nodes: usize,
    /// (from, to, cost) upward edges
    pub up: Vec<(usize, usize, f64)>,
    /// undirected zero-cost edges
    pub syn: Vec<(usize, usize)>,
    pub words: BTreeMap<String, Vec<usize>>,
}

pub fn node_name(i: usize) -> String {
    format!("N{i}")
}

/// Random DAG net with at most 12 nodes and at most 3 senses per word.
/// Synonym classes are formed first; ordinary edges only go from a class
/// of lower rank to one of higher rank so the class graph stays acyclic.
pub fn random_net(rng: &mut impl Rng) -> RandomNet {
    let n = rng.random_range(1..=12);
    let mut class_of = Vec::with_capacity(n);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if !classes.is_empty() && rng.random_bool(0.2) {
            let c = rng.random_range(0..classes.len());
            classes[c].push(i);
            class_of.push(c);
        } else {
            classes.push(vec![i]);
            class_of.push(classes.len() - 1);
        }
    }
    let mut rank: Vec<usize> = (0..classes.len()).collect();
    for i in (1..rank.len()).rev() {
        let j = rng.random_range(0..=i);
        rank.swap(i, j);
    }

    let mut text = String::new();
    for i in 0..n {
        text.push_str(&format!("node {} \"node {i}\"\n", node_name(i)));
    }
    let mut syn = Vec::new();
    for members in &classes {
        for k in 1..members.len() {
            let other = members[rng.random_range(0..k)];
            let (a, b) = if rng.random_bool(0.5) { (members[k], other) } else { (other, members[k]) };
            syn.push((a, b));
            text.push_str(&format!("rel {} synonym {}\n", node_name(a), node_name(b)));
        }
    }
    let density = rng.random_range(0.1..0.5);
    let mut up = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rank[class_of[i]] < rank[class_of[j]] && rng.random_bool(density) {
                let (kind, default) = KINDS[rng.random_range(0..KINDS.len())];
                let cost = if rng.random_bool(0.3) {
                    text.push_str(&format!("rel {} {kind} {}\n", node_name(i), node_name(j)));
                    default
                } else {
                    let c = rng.random_range(0..=12) as f64 * 0.25;
                    text.push_str(&format!("rel {} {kind} {} cost {c}\n", node_name(i), node_name(j)));
                    c
                };
                up.push((i, j, cost));
            }
        }
    }
    let mut words = BTreeMap::new();
    for w in 0..rng.random_range(1..=8) {
        let k = rng.random_range(1..=3.min(n));
        let mut senses: Vec<usize> = (0..n).collect();
        for i in (1..senses.len()).rev() {
            let j = rng.random_range(0..=i);
            senses.swap(i, j);
        }
        senses.truncate(k);
        senses.sort_unstable();
        let name = format!("w{w}");
        for &s in &senses {
            text.push_str(&format!("word \"{name}\" {}\n", node_name(s)));
        }
        words.insert(name, senses);
    }
    RandomNet { text, nodes: n, up, syn, words }
}

impl RandomNet {
    fn neighbours(&self, x: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.up.iter().filter(|e| e.0 == x).map(|e| (e.1, e.2)).collect();
        for &(a, b) in &self.syn {
            if a == x {
                out.push((b, 0.0));
            }
            if b == x {
                out.push((a, 0.0));
            }
        }
        out
    }

    /// Minimal cost to every node over every simple upward path.
    pub fn cone(&self, starts: &[usize]) -> BTreeMap<usize, f64> {
        fn walk(net: &RandomNet, x: usize, cost: f64, on_path: &mut Vec<bool>, best: &mut BTreeMap<usize, f64>) {
            let e = best.entry(x).or_insert(cost);
            if cost < *e {
                *e = cost;
            }
            for (y, w) in net.neighbours(x) {
                if !on_path[y] {
                    on_path[y] = true;
                    walk(net, y, cost + w, on_path, best);
                    on_path[y] = false;
                }
            }
        }
        let mut best = BTreeMap::new();
        for &s in starts {
            let mut on_path = vec![false; self.nodes];
            on_path[s] = true;
            walk(self, s, 0.0, &mut on_path, &mut best);
        }
        best
    }

    /// Precomputes reachability and word cones for repeated queries.
    pub fn oracle(&self) -> NetOracle {
        let reach = (0..self.nodes)
            .map(|x| {
                let c = self.cone(&[x]);
                (0..self.nodes).map(|y| c.contains_key(&y)).collect()
            })
            .collect();
        let cones = self.words.iter().map(|(w, senses)| (w.clone(), self.cone(senses))).collect();
        NetOracle { reach, cones }
    }
}

pub struct NetOracle {
    reach: Vec<Vec<bool>>,
    cones: BTreeMap<String, BTreeMap<usize, f64>>,
}

impl NetOracle {
    /// Lowest-numbered node mutually reachable with `x`.
    fn canonical(&self, x: usize) -> usize {
        (0..self.reach.len()).find(|&y| self.reach[x][y] && self.reach[y][x]).unwrap()
    }

    /// (node id, cost from a, cost from b), sorted by node id.
    pub fn nca(&self, a: &str, b: &str) -> Option<Vec<(String, f64, f64)>> {
        let ca = self.cones.get(a)?;
        let cb = self.cones.get(b)?;
        let common: Vec<usize> = ca.keys().filter(|k| cb.contains_key(k)).copied().collect();
        let mut out = BTreeMap::new();
        for &x in &common {
            let dominated = common.iter().any(|&y| self.reach[y][x] && !self.reach[x][y]);
            if !dominated {
                out.insert(node_name(self.canonical(x)), (ca[&x], cb[&x]));
            }
        }
        Some(out.into_iter().map(|(k, (x, y))| (k, x, y)).collect())
    }

    pub fn proximity(&self, a: &str, b: &str) -> Option<f64> {
        let n = self.nca(a, b)?;
        if n.is_empty() {
            return None;
        }
        Some(n.iter().map(|(_, x, y)| x + y).sum::<f64>() / n.len() as f64)
    }
}

// ---------------------------------------------------------- acquisition

/// Random fixture-vocabulary text of one or more sentences.
pub fn random_text(rng: &mut impl Rng, vocab: &[String]) -> String {
    let len = rng.random_range(1..=14);
    let mut words = Vec::with_capacity(len + 1);
    for _ in 0..len {
        let w = if rng.random_bool(0.08) { ",".to_string() } else { vocab.choose(rng).unwrap().clone() };
        words.push(w);
    }
    if rng.random_bool(0.7) {
        words.push(".".into());
    }
    words.join(" ")
}

pub type OracleRow = (String, Pos, String, Pos, f64, usize, usize);

/// Every ordered pair of plain tokens with no plain token between them,
/// re-checked condition by condition.
pub fn acquisition_oracle(
    net: &SemanticNet,
    lexicon: &Lexicon,
    threshold: f64,
    seed: &SeedPattern,
    s: &Sentence,
) -> Vec<OracleRow> {
    let t = &s.tokens;
    let mut out = Vec::new();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            if !t[i].plain || !t[j].plain || (i + 1..j).any(|k| t[k].plain) {
                continue;
            }
            let (Some(p1), Some(p2)) =
                (net.proximity(&seed.head, t[i].key()).value(), net.proximity(&seed.expansion, t[j].key()).value())
            else {
                continue;
            };
            if p1 > threshold || p2 > threshold {
                continue;
            }
            if !s.chunks.iter().any(|c| c.start <= i && j < c.end) {
                continue;
            }
            if !lexicon.is_predicative(t[i].key(), t[i].pos) {
                continue;
            }
            out.push((t[i].key().to_string(), t[i].pos, t[j].key().to_string(), t[j].pos, p1 + p2, i, j));
        }
    }
    out
}

// ------------------------------------------------------------- automata

fn label_matches(kind: &LabelKind, t: &Token) -> bool {
    match kind {
        LabelKind::Literal(w) | LabelKind::Slot(_, w) => t.surface.to_lowercase() == *w,
        LabelKind::Pos(p) => t.tags.contains(p),
        LabelKind::Modifier => t.tags.contains(&Pos::A),
        LabelKind::Arg => panic!("walker handles single-token labels only"),
    }
}

/// One token of a subset walk.
pub fn step<'a>(
    edges: impl Iterator<Item = (usize, &'a LabelKind, usize)>,
    cur: &BTreeSet<usize>,
    t: &Token,
) -> BTreeSet<usize> {
    edges.filter(|(from, kind, _)| cur.contains(from) && label_matches(kind, t)).map(|(_, _, to)| to).collect()
}

/// Token-by-token subset walk of one automaton given as edges.
pub fn walk<'a>(
    edges: impl Iterator<Item = (usize, &'a LabelKind, usize)> + Clone,
    start: usize,
    tokens: &[Token],
) -> BTreeSet<usize> {
    let mut cur = BTreeSet::from([start]);
    for t in tokens {
        cur = step(edges.clone(), &cur, t);
        if cur.is_empty() {
            break;
        }
    }
    cur
}

pub fn nfa_live(inst: &Instantiated, tokens: &[Token]) -> BTreeSet<usize> {
    walk(inst.edges.iter().map(|(f, l, t)| (*f, &l.kind, *t)), inst.start, tokens)
}

pub fn nfa_accepts(insts: &[Instantiated], tokens: &[Token]) -> bool {
    !tokens.is_empty() && insts.iter().any(|i| nfa_live(i, tokens).iter().any(|s| i.accepting.contains(s)))
}
