//! Translate SPARQL queries between knowledge graphs with an LLM, guided by
//! explicit entity/relation mappings, then judge every translation by
//! executing it and comparing result sets with the gold answers.
//!
//! The pipeline stages each live in their own module:
//!
//! - [`sparql`]: lexing, prefix expansion, term extraction, syntax checks
//! - [`profile`]: per-KG namespaces, endpoints and type property
//! - [`align`]: equivalence lookups, mapping cache, er2 documents
//! - [`exemplar`]: embedding + k-means few-shot exemplar selection
//! - [`prompt`]: the five prompting strategies
//! - [`llm`]: chat-completion client with record/replay cassettes
//! - [`extract`]: pulling a query out of raw model output
//! - [`eval`]: endpoint execution and result-set comparison
//! - [`taxonomy`]: the eight error labels and their heuristics
//! - [`bench`]: benchmark ingestion and gold snapshots
//! - [`pipeline`] and [`report`]: the run matrix and its tables

pub mod align;
pub mod bench;
pub mod cli;
pub mod eval;
pub mod exemplar;
pub mod extract;
pub mod llm;
pub mod pipeline;
pub mod profile;
pub mod prompt;
pub mod report;
pub mod sparql;
#[cfg(feature = "stub")]
pub mod stub;
pub mod taxonomy;

mod util;

pub use profile::{KgProfile, TranslationDirection};
pub use sparql::{Iri, QueryDoc};
