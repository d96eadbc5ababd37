//! Front end for the star-comb duality toolkit: the built-in corpus with
//! expected verdicts, the all-theorems analysis runner, witness files and
//! their standalone verification, and a random term generator for
//! property suites.

pub mod analyze;
pub mod corpus;
pub mod gen;
pub mod witness;

pub use analyze::{analyze, AnalysisReport, TheoremOutcome};
pub use corpus::{corpus, CorpusCase};
pub use witness::{verify_witness, Witness, WitnessData};
