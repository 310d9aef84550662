//! Almost-sure termination analysis for integer probabilistic while-programs.

pub mod certificates;
pub mod cli;
pub mod dist;
pub mod lang;
pub mod lincons;
pub mod rational;
pub mod precision;
pub mod semantics;
pub mod simulator;
pub mod synthesis;
pub mod tailbounds;
