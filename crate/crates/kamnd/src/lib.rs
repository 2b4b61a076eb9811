//! Nondegeneracy analysis for completely integrable Hamiltonians given in
//! action coordinates.
//!
//! A Hamiltonian `F(ξ)` is parsed from a small expression language
//! ([`hamiltonian`]), differentiated exactly to second order with nested
//! dual numbers, and fed to pointwise and region-wise nondegeneracy
//! predicates ([`conditions`]). [`resonance`] enumerates integer resonance
//! vectors, extracts resonant sets and classifies invariant tori;
//! [`hierarchy`] samples points and checks the known equivalences and
//! implications between the conditions, reporting counterexamples.
//! [`oracle`] holds brute-force cross-checks and [`report`] the report
//! builders used by the command-line tool.

pub mod conditions;
pub mod hamiltonian;
pub mod hierarchy;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod resonance;
pub mod sampling;

pub use conditions::{ConditionId, ConditionVerdict, ToleranceConfig};
pub use hamiltonian::{HamiltonianModel, Jet2, Point, Region};
