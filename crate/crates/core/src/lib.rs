//! Finite-precision construction of layerwise isomorphisms between mixing
//! Markov shifts of equal entropy, with empirical verification.

pub mod assignment;
pub mod cli;
pub mod error;
pub mod exact;
pub mod filler;
mod flow;
pub mod intermediate;
pub mod markov;
pub mod skeleton;
pub mod verify;
pub mod society;

pub use error::{Error, Result};
pub use markov::{MarkovProcess, Provenance, Symbol, SymbolSequence};
