//! Grammar-based system-test generation.

pub mod files;
mod labeled;
mod tokens;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use labeled::{
    failing_quota, generate_labeled_set, generate_labeled_set_with, verify_labels, GenerationError, Judge, Judgement,
    LabeledTest, Origin, VerificationEntry, VerificationReport,
};
pub use files::{list_indexed_files, parse_indexed_name, remove_indexed_files, write_system_tests, SIDECAR_FILE, SYSTEM_TEST_PREFIX};
pub use tokens::{detokenize, tokenize};

use crate::grammar::{expansion_depth, min_depths, DerivationTree, Grammar, Symbol};

pub const DEFAULT_MAX_DEPTH: usize = 32;
pub const ATTEMPTS_PER_TEST: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenLimits {
    /// Maximum tree depth, counted in nonterminal levels.
    pub max_depth: usize,
    /// Candidate budget for a whole labeled set.
    pub max_attempts: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        GenLimits {
            max_depth: DEFAULT_MAX_DEPTH,
            max_attempts: ATTEMPTS_PER_TEST,
        }
    }
}

impl GenLimits {
    /// Default limits for a set of `n` tests.
    pub fn for_count(n: usize) -> Self {
        GenLimits {
            max_attempts: ATTEMPTS_PER_TEST * n.max(1),
            ..Self::default()
        }
    }

    /// Raises `max_depth` to the grammar's minimum if it is below it.
    pub fn fitted_to(mut self, g: &Grammar) -> Self {
        let need = min_depths(g)[g.start()];
        self.max_depth = self.max_depth.max(need);
        self
    }
}

/// Random derivation of `g` from its start symbol.
///
/// Each node picks uniformly among the alternatives that can still finish
/// within `max_depth`; when none can, the alternative with the smallest
/// minimal depth is forced (lowest index on ties). The result is a pure
/// function of `(g, seed, limits)`.
pub fn generate_tree(g: &Grammar, seed: u64, limits: &GenLimits) -> DerivationTree {
    let depths = min_depths(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expand(g, g.start(), 1, limits.max_depth, &depths, &mut rng)
}

fn expand(
    g: &Grammar,
    name: &str,
    level: usize,
    max_depth: usize,
    depths: &BTreeMap<String, usize>,
    rng: &mut ChaCha8Rng,
) -> DerivationTree {
    let alts = g.alternatives(name).expect("validated grammar defines every nonterminal");
    let alt_depths: Vec<usize> = alts
        .iter()
        .map(|alt| expansion_depth(alt, depths).expect("validated grammar is productive"))
        .collect();
    let fitting: Vec<usize> = (0..alts.len())
        .filter(|&i| level - 1 + alt_depths[i] <= max_depth)
        .collect();
    let chosen = if fitting.is_empty() {
        (0..alts.len()).min_by_key(|&i| (alt_depths[i], i)).unwrap()
    } else {
        fitting[rng.gen_range(0..fitting.len())]
    };
    let children = alts[chosen]
        .iter()
        .map(|sym| match sym {
            Symbol::Terminal(_) => DerivationTree::leaf(sym.clone()),
            Symbol::Nonterminal(n) => expand(g, n, level + 1, max_depth, depths, rng),
        })
        .collect();
    DerivationTree::new(Symbol::Nonterminal(name.to_string()), children)
}
