//! Attacker classification for AIGER circuits: given a circuit with
//! invariant requirements, determine for every set of compromised latches
//! (and optionally gates) which requirements it can break within a bounded
//! number of steps, using an embedded incremental SAT solver.

pub mod aig;
pub mod analysis;
pub mod classify;
pub mod cnf;
pub mod coverage;
pub mod fixtures;
pub mod report;
pub mod solver;
pub mod unroll;
pub mod witness;

pub use aig::{Aig, ComponentId, Literal};
pub use analysis::{ComponentSet, Universe};
pub use classify::{classify, naive_classify, ClassificationMap, Options, Verdict};
pub use coverage::coverage;
pub use witness::Witness;
