//! Context-free input grammars.
//!
//! A [`Grammar`] is plain BNF: an ordered map from nonterminal names to
//! ordered alternatives, each alternative a sequence of [`Symbol`]s. Grammars
//! are validated on construction (every nonterminal defined, productive and
//! reachable from the start symbol), so every other operation may assume a
//! well-formed grammar.

mod earley;
mod text;
mod tree;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use indexmap::IndexMap;

pub use earley::{parse_input, NoParse};
pub use text::{load_grammar, serialize_grammar};
pub use tree::{features, DerivationTree, FeatureMap};

use crate::fuzzing::{generate_tree, GenLimits};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
}

impl Symbol {
    pub fn terminal(text: impl Into<String>) -> Self {
        Symbol::Terminal(text.into())
    }

    pub fn nonterminal(name: impl Into<String>) -> Self {
        Symbol::Nonterminal(name.into())
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => f.write_str(&text::quote_terminal(t)),
            Symbol::Nonterminal(n) => write!(f, "<{n}>"),
        }
    }
}

/// One alternative of a rule.
pub type Expansion = Vec<Symbol>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("grammar has no rules")]
    Empty,
    #[error("invalid nonterminal name {0:?}")]
    InvalidName(String),
    #[error("rule <{name}> has an empty alternative (write \"\" for the empty string)")]
    EmptyExpansion { name: String },
    #[error("start symbol <{0}> has no rule")]
    MissingStart(String),
    #[error("undefined nonterminal <{name}> referenced from <{referenced_by}>")]
    UndefinedNonterminal { name: String, referenced_by: String },
    #[error("nonterminal <{name}> is unreachable from the start symbol")]
    Unreachable { name: String },
    #[error("nonterminal <{name}> derives no finite terminal string")]
    Nonproductive { name: String },
}

/// A validated context-free grammar.
///
/// Rule order and alternative order are significant: the first rule's
/// left-hand side is the start symbol, and alternative indices are used for
/// tie-breaking during parsing and generation.
#[derive(Clone)]
pub struct Grammar {
    start: String,
    rules: IndexMap<String, Vec<Expansion>>,
    compiled: OnceLock<earley::Compiled>,
}

impl fmt::Debug for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grammar")
            .field("start", &self.start)
            .field("rules", &self.rules)
            .finish()
    }
}

/// Structural, order-sensitive equality.
impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start && self.rules.iter().eq(other.rules.iter())
    }
}

impl Eq for Grammar {}

pub(crate) fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl Grammar {
    /// Builds and validates a grammar from its rules, in order.
    pub fn new<I>(start: impl Into<String>, rules: I) -> Result<Self, GrammarError>
    where
        I: IntoIterator<Item = (String, Vec<Expansion>)>,
    {
        let mut map: IndexMap<String, Vec<Expansion>> = IndexMap::new();
        for (name, alts) in rules {
            map.entry(name).or_default().extend(alts);
        }
        let grammar = Grammar {
            start: start.into(),
            rules: map,
            compiled: OnceLock::new(),
        };
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rules(&self) -> impl Iterator<Item = (&str, &[Expansion])> {
        self.rules.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn alternatives(&self, name: &str) -> Option<&[Expansion]> {
        self.rules.get(name).map(Vec::as_slice)
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub(crate) fn compiled(&self) -> &earley::Compiled {
        self.compiled.get_or_init(|| earley::Compiled::new(self))
    }

    fn validate(&self) -> Result<(), GrammarError> {
        if self.rules.is_empty() {
            return Err(GrammarError::Empty);
        }
        for (name, alts) in &self.rules {
            if !is_valid_name(name) {
                return Err(GrammarError::InvalidName(name.clone()));
            }
            if alts.iter().any(Vec::is_empty) {
                return Err(GrammarError::EmptyExpansion { name: name.clone() });
            }
        }
        if !self.rules.contains_key(&self.start) {
            return Err(GrammarError::MissingStart(self.start.clone()));
        }
        for (name, alts) in &self.rules {
            for sym in alts.iter().flatten() {
                if let Symbol::Nonterminal(n) = sym {
                    if !self.rules.contains_key(n) {
                        return Err(GrammarError::UndefinedNonterminal {
                            name: n.clone(),
                            referenced_by: name.clone(),
                        });
                    }
                }
            }
        }
        let depths = self.depth_fixpoint();
        if let Some(name) = self.rules.keys().find(|n| !depths.contains_key(n.as_str())) {
            return Err(GrammarError::Nonproductive { name: name.clone() });
        }
        let reachable = self.reachable();
        if let Some(name) = self.rules.keys().find(|n| !reachable.contains(n.as_str())) {
            return Err(GrammarError::Unreachable { name: name.clone() });
        }
        Ok(())
    }

    fn reachable(&self) -> HashSet<&str> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([self.start.as_str()]);
        seen.insert(self.start.as_str());
        while let Some(name) = queue.pop_front() {
            for sym in self.rules.get(name).into_iter().flatten().flatten() {
                if let Symbol::Nonterminal(n) = sym {
                    if seen.insert(n.as_str()) {
                        queue.push_back(n.as_str());
                    }
                }
            }
        }
        seen
    }

    /// Least fixpoint of minimal derivation depth; nonproductive
    /// nonterminals are absent from the result.
    fn depth_fixpoint(&self) -> BTreeMap<String, usize> {
        let mut depths: BTreeMap<String, usize> = BTreeMap::new();
        loop {
            let mut changed = false;
            for (name, alts) in &self.rules {
                let best = alts
                    .iter()
                    .filter_map(|alt| expansion_depth(alt, &depths))
                    .min();
                if let Some(d) = best {
                    if depths.get(name).is_none_or(|&cur| d < cur) {
                        depths.insert(name.clone(), d);
                        changed = true;
                    }
                }
            }
            if !changed {
                return depths;
            }
        }
    }
}

/// Depth of the shallowest tree rooted at a node expanded with `alt`, or
/// `None` if some nonterminal in it has no known depth yet.
pub(crate) fn expansion_depth(alt: &[Symbol], depths: &BTreeMap<String, usize>) -> Option<usize> {
    let mut deepest = 0;
    for sym in alt {
        if let Symbol::Nonterminal(n) = sym {
            deepest = deepest.max(*depths.get(n)?);
        }
    }
    Some(deepest + 1)
}

/// Minimal derivation depth of every nonterminal: the height of the
/// shallowest derivation tree with an all-terminal frontier, counting
/// nonterminal levels (terminals contribute 0).
pub fn min_depths(g: &Grammar) -> BTreeMap<String, usize> {
    g.depth_fixpoint()
}

/// Sampling-based precision and recall of `candidate` against `truth`.
///
/// Precision is the fraction of `k` samples drawn from `candidate` that
/// `truth` accepts; recall is the fraction of `k` samples drawn from `truth`
/// that `candidate` accepts. Both sample streams are fixed by `seed`.
pub fn grammar_precision_recall(candidate: &Grammar, truth: &Grammar, k: usize, seed: u64) -> (f64, f64) {
    assert!(k >= 1, "sample count must be at least 1");
    let accepted = |from: &Grammar, by: &Grammar, stream: u64| {
        let limits = GenLimits::default().fitted_to(from);
        (0..k)
            .filter(|&i| {
                let tree = generate_tree(from, derive_seed(seed, &[stream, i as u64]), &limits);
                parse_input(by, &tree.frontier()).is_ok()
            })
            .count()
    };
    let precision = accepted(candidate, truth, 0) as f64 / k as f64;
    let recall = accepted(truth, candidate, 1) as f64 / k as f64;
    (precision, recall)
}
