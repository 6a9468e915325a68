//! Exact computation of tensor rank invariants over finite fields: subrank
//! lower bounds with replayable certificates, geometric rank by stratified
//! point counting over extension fields, exact bias / analytic rank, and
//! slice / partition rank at desk scale.

pub mod cli;
pub mod error;
pub mod gf;
pub mod io;
pub mod linalg;
pub mod slicerank;
pub mod strata;
pub mod subrank;
pub mod tensor;

pub use cli::cli_main;
pub use error::{Error, Result};
