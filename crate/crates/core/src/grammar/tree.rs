use std::collections::BTreeMap;

use serde::Serialize;

use super::Symbol;

/// A concrete derivation of one input. Terminal nodes have no children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DerivationTree {
    symbol: Symbol,
    children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn new(symbol: Symbol, children: Vec<DerivationTree>) -> Self {
        DerivationTree { symbol, children }
    }

    pub fn leaf(symbol: Symbol) -> Self {
        DerivationTree {
            symbol,
            children: Vec::new(),
        }
    }

    pub fn symbol(&self) -> &Symbol {
        &self.symbol
    }

    pub fn children(&self) -> &[DerivationTree] {
        &self.children
    }

    /// Left-to-right concatenation of the terminal leaves.
    pub fn frontier(&self) -> String {
        let mut out = String::new();
        self.push_frontier(&mut out);
        out
    }

    fn push_frontier(&self, out: &mut String) {
        match &self.symbol {
            Symbol::Terminal(t) => out.push_str(t),
            Symbol::Nonterminal(_) => self.children.iter().for_each(|c| c.push_frontier(out)),
        }
    }

    /// Height counting nonterminal levels only.
    pub fn depth(&self) -> usize {
        match self.symbol {
            Symbol::Terminal(_) => 0,
            Symbol::Nonterminal(_) => 1 + self.children.iter().map(Self::depth).max().unwrap_or(0),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }
}

/// Substrings matched by each nonterminal of a derivation, in order of
/// leftmost occurrence (outer before inner at equal offsets).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FeatureMap(BTreeMap<String, Vec<String>>);

impl FeatureMap {
    pub fn get(&self, nonterminal: &str) -> &[String] {
        self.0.get(nonterminal).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, nonterminal: &str) -> bool {
        self.0.contains_key(nonterminal)
    }

    pub fn insert(&mut self, nonterminal: impl Into<String>, value: impl Into<String>) {
        self.0.entry(nonterminal.into()).or_default().push(value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for FeatureMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut map = FeatureMap::default();
        for (k, v) in iter {
            map.insert(k, v);
        }
        map
    }
}

pub fn features(tree: &DerivationTree) -> FeatureMap {
    // Returns the frontier of `node` while recording its nonterminal
    // features in preorder.
    fn walk(node: &DerivationTree, map: &mut FeatureMap) -> String {
        match &node.symbol {
            Symbol::Terminal(t) => t.clone(),
            Symbol::Nonterminal(name) => {
                let slot = {
                    let list = map.0.entry(name.clone()).or_default();
                    list.push(String::new());
                    list.len() - 1
                };
                let text: String = node.children.iter().map(|c| walk(c, map)).collect();
                map.0.get_mut(name).expect("entry inserted above")[slot] = text.clone();
                text
            }
        }
    }
    let mut map = FeatureMap::default();
    walk(tree, &mut map);
    map
}
