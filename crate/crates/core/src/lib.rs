//! Reproducible benchmark of input-dependent bugs: a registry of bug
//! descriptors, context-free input grammars with an Earley parser, a
//! grammar-based test generator, a declarative test oracle, and the
//! checkout/compile/test machinery that ties them together.

pub mod execution;
pub mod fuzzing;
pub mod grammar;
pub mod oracle;
pub mod registry;
mod seed;

pub use seed::derive_seed;
