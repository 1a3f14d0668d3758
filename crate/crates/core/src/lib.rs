pub mod cli;
pub mod error;
pub mod funcrep;
pub mod linalg;
pub mod opial;
pub mod quad;
pub mod taylor;
pub mod testgen;
pub mod widder;
