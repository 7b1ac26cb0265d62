//! Satisfiability checking and model checking for the logic of knowing how
//! over labelled transition systems.
//!
//! The decision procedure splits a formula into conjunctions of `Kh` atoms,
//! translates each conjunction into a flat universal-modality formula, solves
//! that with a propositional backend, and turns the resulting small model back
//! into a transition system that is checked against the input.

pub mod cli;
pub mod lts;
pub mod oracle;
pub mod s5;
pub mod sat;
pub mod solver;
pub mod syntax;
pub mod translate;

pub use lts::{LtsModel, Plan, TruthSet};
pub use solver::{decide, verify, Verdict};
pub use syntax::{desugar, parse, Formula};
