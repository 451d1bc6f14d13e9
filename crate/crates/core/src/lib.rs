//! Decision theory over branching quantum outcomes: problems, acts,
//! preference rules, axiom checkers, the representation theorem and a
//! counterexample search.

pub mod error;
pub mod generate;
pub mod linalg;
pub mod axioms;
pub mod construct;
pub mod model;
pub mod rules;
pub mod search;
pub mod theorem;

pub use error::{Error, Result};
