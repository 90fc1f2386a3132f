//! Weakest pre-loss semantics for a probabilistic language with hidden state,
//! leaks and demonic choice, with refinement and simulation checking.

pub mod algebra;
pub mod lang;
pub mod lp;
pub mod loss;
pub mod wpl;
pub mod oracle;
pub mod refine;
pub mod random;
