//! Earley recognition plus deterministic derivation-tree extraction.
//!
//! Terminals are whole strings (possibly empty), so chart positions are byte
//! offsets and a scan may advance by several bytes or by none. Nullable
//! nonterminals are handled with the Aycock-Horspool prediction rule.
//!
//! Ambiguity is resolved top-down: at every node the lowest-indexed
//! alternative that admits a derivation of the span wins, and children are
//! assigned left to right, each taking the shortest span that still lets
//! the remaining symbols complete.

use std::collections::HashMap;
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{DerivationTree, Grammar, Symbol};

#[derive(Debug, Clone)]
enum Sym {
    T(String),
    N(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    names: Vec<String>,
    alts: Vec<Vec<Vec<Sym>>>,
    start: u32,
    nullable: Vec<bool>,
}

impl Compiled {
    pub(crate) fn new(g: &Grammar) -> Self {
        let names: Vec<String> = g.nonterminals().map(str::to_string).collect();
        let index: HashMap<&str, u32> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
        let alts: Vec<Vec<Vec<Sym>>> = g
            .rules()
            .map(|(_, alts)| {
                alts.iter()
                    .map(|alt| {
                        alt.iter()
                            .map(|s| match s {
                                Symbol::Terminal(t) => Sym::T(t.clone()),
                                Symbol::Nonterminal(n) => Sym::N(index[n.as_str()]),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut nullable = vec![false; names.len()];
        loop {
            let mut changed = false;
            for (nt, rule) in alts.iter().enumerate() {
                if nullable[nt] {
                    continue;
                }
                let derives_empty = rule.iter().any(|alt| {
                    alt.iter().all(|s| match s {
                        Sym::T(t) => t.is_empty(),
                        Sym::N(n) => nullable[*n as usize],
                    })
                });
                if derives_empty {
                    nullable[nt] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Compiled {
            start: index[g.start()],
            names,
            alts,
            nullable,
        }
    }
}

/// Input rejected by the grammar. `position` is the furthest byte offset up
/// to which some prefix of the input was still derivable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("input does not parse (furthest position {position})")]
pub struct NoParse {
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    nt: u32,
    alt: u32,
    dot: u32,
    origin: u32,
}

/// Parses `s` against `g`. On success the tree's frontier equals `s`.
pub fn parse_input(g: &Grammar, s: &str) -> Result<DerivationTree, NoParse> {
    let c = g.compiled();
    let chart = Chart::build(c, s);
    let n = s.len() as u32;
    if !chart.is_complete(c.start, 0, n) {
        return Err(NoParse {
            position: chart.furthest,
        });
    }
    let mut ex = Extractor {
        c,
        input: s,
        ends: &chart.ends,
        memo: FxHashMap::default(),
        in_progress: FxHashSet::default(),
        feasible: FxHashMap::default(),
    };
    match ex.derive(c.start, 0, n).0 {
        Some(node) => Ok(node.to_tree(c)),
        None => Err(NoParse { position: s.len() }),
    }
}

struct State {
    sets: Vec<Vec<Item>>,
    seen: Vec<FxHashSet<Item>>,
    /// Items at position `p` expecting nonterminal `b`, at index `p * k + b`.
    waiting: Vec<Vec<Item>>,
    k: usize,
}

impl State {
    fn add(&mut self, c: &Compiled, pos: usize, item: Item) {
        if !self.seen[pos].insert(item) {
            return;
        }
        self.sets[pos].push(item);
        if let Some(Sym::N(b)) = c.alts[item.nt as usize][item.alt as usize].get(item.dot as usize) {
            self.waiting[pos * self.k + *b as usize].push(item);
        }
    }
}

struct Chart {
    /// (nonterminal, origin) -> sorted end positions of completed spans.
    ends: FxHashMap<(u32, u32), Vec<u32>>,
    furthest: usize,
}

impl Chart {
    fn build(c: &Compiled, s: &str) -> Chart {
        let n = s.len();
        let k = c.names.len();
        let mut st = State {
            sets: vec![Vec::new(); n + 1],
            seen: vec![FxHashSet::default(); n + 1],
            waiting: vec![Vec::new(); (n + 1) * k],
            k,
        };
        let mut completed: FxHashSet<(u32, u32, u32)> = FxHashSet::default();
        let mut furthest = 0;

        for alt in 0..c.alts[c.start as usize].len() {
            st.add(
                c,
                0,
                Item {
                    nt: c.start,
                    alt: alt as u32,
                    dot: 0,
                    origin: 0,
                },
            );
        }

        for pos in 0..=n {
            if st.sets[pos].is_empty() {
                continue;
            }
            furthest = pos;
            let mut i = 0;
            while i < st.sets[pos].len() {
                let item = st.sets[pos][i];
                i += 1;
                let rhs = &c.alts[item.nt as usize][item.alt as usize];
                match rhs.get(item.dot as usize) {
                    None => {
                        // the same completion from another alternative advances the same items
                        if !completed.insert((item.nt, item.origin, pos as u32)) {
                            continue;
                        }
                        let slot = item.origin as usize * k + item.nt as usize;
                        let mut j = 0;
                        while j < st.waiting[slot].len() {
                            let waiting = st.waiting[slot][j];
                            j += 1;
                            st.add(c, pos, Item { dot: waiting.dot + 1, ..waiting });
                        }
                    }
                    Some(Sym::N(b)) => {
                        let b = *b;
                        for alt in 0..c.alts[b as usize].len() {
                            st.add(
                                c,
                                pos,
                                Item {
                                    nt: b,
                                    alt: alt as u32,
                                    dot: 0,
                                    origin: pos as u32,
                                },
                            );
                        }
                        if c.nullable[b as usize] {
                            st.add(c, pos, Item { dot: item.dot + 1, ..item });
                        }
                    }
                    Some(Sym::T(t)) => {
                        if s.as_bytes()[pos..].starts_with(t.as_bytes()) {
                            st.add(c, pos + t.len(), Item { dot: item.dot + 1, ..item });
                        }
                    }
                }
            }
        }

        let mut ends: FxHashMap<(u32, u32), Vec<u32>> = FxHashMap::default();
        for (nt, origin, end) in completed {
            ends.entry((nt, origin)).or_default().push(end);
        }
        for v in ends.values_mut() {
            v.sort_unstable();
        }
        Chart { ends, furthest }
    }

    fn is_complete(&self, nt: u32, origin: u32, end: u32) -> bool {
        self.ends
            .get(&(nt, origin))
            .is_some_and(|v| v.binary_search(&end).is_ok())
    }
}

enum Node {
    Leaf(u32, u32, u32),
    Inner { nt: u32, children: Vec<Rc<Node>> },
}

impl Node {
    fn to_tree(&self, c: &Compiled) -> DerivationTree {
        match self {
            Node::Leaf(nt, alt, dot) => match &c.alts[*nt as usize][*alt as usize][*dot as usize] {
                Sym::T(t) => DerivationTree::leaf(Symbol::Terminal(t.clone())),
                Sym::N(_) => unreachable!("leaf nodes are terminals"),
            },
            Node::Inner { nt, children } => DerivationTree::new(
                Symbol::Nonterminal(c.names[*nt as usize].clone()),
                children.iter().map(|ch| ch.to_tree(c)).collect(),
            ),
        }
    }
}

type Span = (u32, u32, u32);

struct Extractor<'a> {
    c: &'a Compiled,
    input: &'a str,
    ends: &'a FxHashMap<(u32, u32), Vec<u32>>,
    memo: FxHashMap<Span, Option<Rc<Node>>>,
    in_progress: FxHashSet<Span>,
    feasible: FxHashMap<(u32, u32, u32, u32, u32), bool>,
}

impl Extractor<'_> {
    fn ends_of(&self, nt: u32, p: u32) -> &[u32] {
        self.ends.get(&(nt, p)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether symbols `dot..` of an alternative can span exactly `p..j`.
    fn seq_feasible(&mut self, nt: u32, alt: u32, dot: u32, p: u32, j: u32) -> bool {
        let key = (nt, alt, dot, p, j);
        if let Some(&hit) = self.feasible.get(&key) {
            return hit;
        }
        let rhs = &self.c.alts[nt as usize][alt as usize];
        let result = match rhs.get(dot as usize) {
            None => p == j,
            Some(Sym::T(t)) => {
                let end = p as usize + t.len();
                end <= j as usize
                    && self.input.as_bytes()[p as usize..].starts_with(t.as_bytes())
                    && self.seq_feasible(nt, alt, dot + 1, end as u32, j)
            }
            Some(Sym::N(b)) => {
                let candidates: Vec<u32> = self.ends_of(*b, p).iter().copied().filter(|&e| e <= j).collect();
                candidates.into_iter().any(|e| self.seq_feasible(nt, alt, dot + 1, e, j))
            }
        };
        self.feasible.insert(key, result);
        result
    }

    /// Returns the derivation for `nt` over `p..e`, and whether the search
    /// was cut short by a span already being derived further up.
    fn derive(&mut self, nt: u32, p: u32, e: u32) -> (Option<Rc<Node>>, bool) {
        let key = (nt, p, e);
        if let Some(hit) = self.memo.get(&key) {
            return (hit.clone(), false);
        }
        if !self.in_progress.insert(key) {
            return (None, true);
        }
        let mut blocked = false;
        let mut result = None;
        for alt in 0..self.c.alts[nt as usize].len() as u32 {
            if !self.seq_feasible(nt, alt, 0, p, e) {
                continue;
            }
            let (children, hit) = self.derive_seq(nt, alt, 0, p, e);
            blocked |= hit;
            if let Some(children) = children {
                result = Some(Rc::new(Node::Inner { nt, children }));
                break;
            }
        }
        self.in_progress.remove(&key);
        if result.is_some() || !blocked {
            self.memo.insert(key, result.clone());
        }
        (result, blocked)
    }

    fn derive_seq(&mut self, nt: u32, alt: u32, dot: u32, p: u32, j: u32) -> (Option<Vec<Rc<Node>>>, bool) {
        let rhs = &self.c.alts[nt as usize][alt as usize];
        match rhs.get(dot as usize) {
            None => ((p == j).then(Vec::new), false),
            Some(Sym::T(t)) => {
                let end = p + t.len() as u32;
                let (rest, blocked) = self.derive_seq(nt, alt, dot + 1, end, j);
                let rest = rest.map(|mut v| {
                    v.insert(0, Rc::new(Node::Leaf(nt, alt, dot)));
                    v
                });
                (rest, blocked)
            }
            Some(Sym::N(b)) => {
                let b = *b;
                let mut blocked = false;
                let candidates: Vec<u32> = self.ends_of(b, p).iter().copied().filter(|&e| e <= j).collect();
                for e in candidates {
                    if !self.seq_feasible(nt, alt, dot + 1, e, j) {
                        continue;
                    }
                    let (child, hit) = self.derive(b, p, e);
                    blocked |= hit;
                    let Some(child) = child else { continue };
                    let (rest, hit) = self.derive_seq(nt, alt, dot + 1, e, j);
                    blocked |= hit;
                    if let Some(mut rest) = rest {
                        rest.insert(0, child);
                        return (Some(rest), blocked);
                    }
                }
                (None, blocked)
            }
        }
    }
}
