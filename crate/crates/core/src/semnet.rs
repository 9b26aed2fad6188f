//! Weighted semantic network and the activation proximity between words.
//!
//! Relations are stored specific → general. Cones are built by walking
//! upward edges with a shortest-path traversal; synonym edges are zero-cost
//! and collapse their endpoints into one equivalence class whose
//! representative is the earliest-declared member.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: reference to undeclared node `{id}`")]
    Dangling { line: usize, id: String },
    #[error("cycle in relation graph through node `{0}`")]
    Cycle(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown word `{0}`")]
    UnknownWord(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    Hypernym,
    Synonym,
    Meronym,
    Association,
}

impl RelationKind {
    pub fn default_cost(self) -> f64 {
        match self {
            RelationKind::Hypernym => 1.0,
            RelationKind::Synonym => 0.0,
            RelationKind::Meronym => 1.5,
            RelationKind::Association => 2.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hypernym" | "hyper" | "isa" => Some(RelationKind::Hypernym),
            "synonym" | "syn" => Some(RelationKind::Synonym),
            "meronym" | "mero" | "part-of" => Some(RelationKind::Meronym),
            "association" | "assoc" => Some(RelationKind::Association),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Hypernym => "hypernym",
            RelationKind::Synonym => "synonym",
            RelationKind::Meronym => "meronym",
            RelationKind::Association => "association",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SenseNode {
    pub id: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub kind: RelationKind,
    pub cost: f64,
}

/// Result of the activation measure. `Unrelated` sorts above every value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proximity {
    Value(f64),
    Unrelated,
}

impl Proximity {
    pub fn value(self) -> Option<f64> {
        match self {
            Proximity::Value(v) => Some(v),
            Proximity::Unrelated => None,
        }
    }

    /// `true` iff the proximity is a finite value not above `threshold`.
    pub fn within(self, threshold: f64) -> bool {
        matches!(self, Proximity::Value(v) if v <= threshold)
    }
}

impl PartialOrd for Proximity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Proximity::Value(a), Proximity::Value(b)) => a.partial_cmp(b),
            (Proximity::Value(_), Proximity::Unrelated) => Some(Ordering::Less),
            (Proximity::Unrelated, Proximity::Value(_)) => Some(Ordering::Greater),
            (Proximity::Unrelated, Proximity::Unrelated) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Proximity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proximity::Value(v) => write!(f, "{v}"),
            Proximity::Unrelated => f.write_str("unrelated"),
        }
    }
}

/// One nearest common ancestor with the cheapest cost from each word.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonAncestor {
    pub node: String,
    pub cost_a: f64,
    pub cost_b: f64,
}

#[derive(Clone, Debug)]
pub struct SemanticNet {
    nodes: Vec<SenseNode>,
    index: HashMap<String, usize>,
    relations: Vec<Relation>,
    lexicon: BTreeMap<String, Vec<usize>>,
    /// node index → index of its synonym-class representative
    class: Vec<usize>,
    /// members of each class, keyed by representative
    members: Vec<Vec<usize>>,
    /// upward edges between representatives, cheapest per target
    up: Vec<Vec<(usize, f64)>>,
}

impl SemanticNet {
    /// Parses and validates a net file.
    pub fn parse(text: &str) -> Result<SemanticNet, NetError> {
        let mut nodes: Vec<SenseNode> = Vec::new();
        let mut index = HashMap::new();
        let mut pending_rels = Vec::new();
        let mut pending_words = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields = split_fields(raw).map_err(|message| NetError::Parse { line, message })?;
            let Some((head, rest)) = fields.split_first() else {
                continue;
            };
            let err = |message: String| NetError::Parse { line, message };
            match head.text.as_str() {
                "node" => {
                    let [id, label] = rest else {
                        return Err(err("expected `node <id> \"<label>\"`".into()));
                    };
                    if id.quoted || id.text.is_empty() {
                        return Err(err("node id must be a bare word".into()));
                    }
                    if index.contains_key(&id.text) {
                        return Err(err(format!("duplicate node `{}`", id.text)));
                    }
                    index.insert(id.text.clone(), nodes.len());
                    nodes.push(SenseNode { id: id.text.clone(), label: label.text.clone() });
                }
                "rel" => {
                    let (src, kind, dst, cost) = match rest {
                        [s, k, d] => (s, k, d, None),
                        [s, k, d, kw, c] if kw.text == "cost" && !kw.quoted => (s, k, d, Some(c)),
                        _ => return Err(err("expected `rel <src> <kind> <dst> [cost <real>]`".into())),
                    };
                    let kind = RelationKind::parse(&kind.text)
                        .ok_or_else(|| err(format!("unknown relation kind `{}`", kind.text)))?;
                    let cost = match cost {
                        None => kind.default_cost(),
                        Some(c) => {
                            let v: f64 = c.text.parse().map_err(|_| err(format!("invalid cost `{}`", c.text)))?;
                            if !v.is_finite() || v < 0.0 {
                                return Err(err(format!("cost must be finite and non-negative, got {}", c.text)));
                            }
                            v
                        }
                    };
                    if kind == RelationKind::Synonym && cost != 0.0 {
                        return Err(err("synonym relations must have cost 0".into()));
                    }
                    pending_rels
                        .push((line, Relation { source: src.text.clone(), target: dst.text.clone(), kind, cost }));
                }
                "word" => {
                    let [surface, id] = rest else {
                        return Err(err("expected `word \"<surface>\" <node-id>`".into()));
                    };
                    if surface.text.is_empty() {
                        return Err(err("empty word".into()));
                    }
                    pending_words.push((line, surface.text.to_lowercase(), id.text.clone()));
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }

        let resolve = |line: usize, id: &str| {
            index.get(id).copied().ok_or_else(|| NetError::Dangling { line, id: id.to_string() })
        };

        let mut edges = Vec::with_capacity(pending_rels.len());
        for (line, rel) in &pending_rels {
            edges.push((resolve(*line, &rel.source)?, resolve(*line, &rel.target)?, rel.kind, rel.cost));
        }
        let mut lexicon: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (line, word, id) in &pending_words {
            let n = resolve(*line, id)?;
            let senses = lexicon.entry(word.clone()).or_default();
            if !senses.contains(&n) {
                senses.push(n);
                senses.sort_unstable();
            }
        }

        // synonym classes, representative = smallest declaration index
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let next = parent[c];
                parent[c] = r;
                c = next;
            }
            r
        }
        for &(s, t, kind, _) in &edges {
            if kind == RelationKind::Synonym {
                let (a, b) = (find(&mut parent, s), find(&mut parent, t));
                if a != b {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi] = lo;
                }
            }
        }
        let class: Vec<usize> = (0..nodes.len()).map(|n| find(&mut parent, n)).collect();
        let mut members = vec![Vec::new(); nodes.len()];
        for (n, &r) in class.iter().enumerate() {
            members[r].push(n);
        }

        let mut best: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
        for &(s, t, kind, cost) in &edges {
            if kind == RelationKind::Synonym {
                continue;
            }
            let (rs, rt) = (class[s], class[t]);
            if rs == rt {
                return Err(NetError::Cycle(nodes[s].id.clone()));
            }
            let slot = best[rs].entry(rt).or_insert(cost);
            if cost < *slot {
                *slot = cost;
            }
        }
        let up: Vec<Vec<(usize, f64)>> = best.into_iter().map(|m| m.into_iter().collect()).collect();

        let net = SemanticNet {
            nodes,
            index,
            relations: pending_rels.into_iter().map(|(_, r)| r).collect(),
            lexicon,
            class,
            members,
            up,
        };
        net.check_acyclic()?;
        Ok(net)
    }

    fn check_acyclic(&self) -> Result<(), NetError> {
        let reps: Vec<usize> = (0..self.nodes.len()).filter(|&n| self.class[n] == n).collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        for &r in &reps {
            for &(t, _) in &self.up[r] {
                indegree[t] += 1;
            }
        }
        let mut stack: Vec<usize> = reps.iter().copied().filter(|&r| indegree[r] == 0).collect();
        let mut seen = 0;
        while let Some(r) = stack.pop() {
            seen += 1;
            for &(t, _) in &self.up[r] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    stack.push(t);
                }
            }
        }
        if seen == reps.len() {
            return Ok(());
        }
        let culprit = reps
            .iter()
            .copied()
            .filter(|&r| indegree[r] > 0)
            .min_by(|&a, &b| self.nodes[a].id.cmp(&self.nodes[b].id))
            .expect("unvisited node exists");
        Err(NetError::Cycle(self.nodes[culprit].id.clone()))
    }

    pub fn nodes(&self) -> &[SenseNode] {
        &self.nodes
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.lexicon.keys().map(String::as_str)
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.lexicon.contains_key(&word.to_lowercase())
    }

    /// Node ids for the senses of `word`.
    pub fn senses(&self, word: &str) -> Option<Vec<&str>> {
        self.lexicon.get(&word.to_lowercase()).map(|s| s.iter().map(|&n| self.nodes[n].id.as_str()).collect())
    }

    /// Cheapest upward cost from a set of start nodes to every reachable
    /// representative.
    fn rep_cone(&self, starts: &[usize]) -> BTreeMap<usize, f64> {
        let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        for &s in starts {
            let r = self.class[s];
            if dist.insert(r, 0.0).is_none() {
                heap.push(Frontier { cost: 0.0, node: r });
            }
        }
        while let Some(Frontier { cost, node }) = heap.pop() {
            if cost > dist[&node] {
                continue;
            }
            for &(t, w) in &self.up[node] {
                let next = cost + w;
                let better = match dist.get(&t) {
                    Some(&d) => next < d,
                    None => true,
                };
                if better {
                    dist.insert(t, next);
                    heap.push(Frontier { cost: next, node: t });
                }
            }
        }
        dist
    }

    /// Every node reachable upward from `node`, with its cheapest cost.
    /// Members of a synonym class share the class cost.
    pub fn ancestor_cone(&self, node: &str) -> Result<BTreeMap<String, f64>, NetError> {
        let &n = self.index.get(node).ok_or_else(|| NetError::UnknownNode(node.to_string()))?;
        let mut out = BTreeMap::new();
        for (rep, cost) in self.rep_cone(&[n]) {
            for &m in &self.members[rep] {
                out.insert(self.nodes[m].id.clone(), cost);
            }
        }
        Ok(out)
    }

    fn word_cone(&self, word: &str) -> Result<BTreeMap<usize, f64>, NetError> {
        let senses = self.lexicon.get(&word.to_lowercase()).ok_or_else(|| NetError::UnknownWord(word.to_string()))?;
        Ok(self.rep_cone(senses))
    }

    /// Minimal elements of the common-ancestor set of `a` and `b`, sorted by
    /// node id. Polysemous words contribute the union of their sense cones
    /// and the cheapest cost over senses.
    pub fn nearest_common_ancestors(&self, a: &str, b: &str) -> Result<Vec<CommonAncestor>, NetError> {
        let cone_a = self.word_cone(a)?;
        let cone_b = self.word_cone(b)?;
        let common: BTreeSet<usize> = cone_a.keys().filter(|n| cone_b.contains_key(n)).copied().collect();

        // anything reachable upward from a common node, excluding the node
        // itself, has a descendant in the set and is not nearest
        let mut dominated = BTreeSet::new();
        let mut stack: Vec<usize> = common.iter().flat_map(|&c| self.up[c].iter().map(|&(t, _)| t)).collect();
        while let Some(n) = stack.pop() {
            if dominated.insert(n) {
                stack.extend(self.up[n].iter().map(|&(t, _)| t));
            }
        }

        let mut out: Vec<CommonAncestor> = common
            .iter()
            .filter(|n| !dominated.contains(n))
            .map(|&n| CommonAncestor { node: self.nodes[n].id.clone(), cost_a: cone_a[&n], cost_b: cone_b[&n] })
            .collect();
        out.sort_by(|x, y| x.node.cmp(&y.node));
        Ok(out)
    }

    /// Mean over nearest common ancestors of the summed costs from both
    /// words. Total: unknown words and disjoint cones give `Unrelated`.
    pub fn proximity(&self, a: &str, b: &str) -> Proximity {
        match self.nearest_common_ancestors(a, b) {
            Ok(ncas) if !ncas.is_empty() => {
                let sum: f64 = ncas.iter().map(|c| c.cost_a + c.cost_b).sum();
                Proximity::Value(sum / ncas.len() as f64)
            }
            _ => Proximity::Unrelated,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // min-heap on cost, ties broken on node index
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

#[derive(Debug, PartialEq)]
pub(crate) struct Field {
    pub text: String,
    pub quoted: bool,
}

/// Splits a line into bare and double-quoted fields; `#` outside quotes
/// starts a comment.
pub(crate) fn split_fields(line: &str) -> Result<Vec<Field>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.peek() {
            None | Some('#') => break,
            Some('"') => {
                chars.next();
                let mut text = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated quoted string".into()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c @ ('"' | '\\')) => text.push(c),
                            Some(c) => return Err(format!("invalid escape `\\{c}`")),
                            None => return Err("unterminated quoted string".into()),
                        },
                        Some(c) => text.push(c),
                    }
                }
                if chars.peek().is_some_and(|c| !c.is_whitespace() && *c != '#') {
                    return Err("missing whitespace after quoted string".into());
                }
                out.push(Field { text, quoted: true });
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '"' {
                        break;
                    }
                    text.push(c);
                    chars.next();
                }
                out.push(Field { text, quoted: false });
            }
        }
    }
    Ok(out)
}
